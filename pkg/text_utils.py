"""Number formatting helpers for the human-readable tables."""
from __future__ import annotations

import math
import numbers

from constants import HUMAN_DIGITS


def format_number(value: float | int | None, digits: int = HUMAN_DIGITS) -> str:
    """Render a number with ``digits`` significant digits; NA for missing values."""

    if value is None:
        return "NA"
    if isinstance(value, numbers.Integral) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "NA"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return f"{value:.{digits}g}"


__all__ = ["format_number"]
