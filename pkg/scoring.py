"""Tail probabilities for the test statistics reported by the engine."""
from __future__ import annotations

import numpy as np
from scipy import special


def chi_square_upper_tail(statistic: float, df: int) -> float:
    """P(X >= statistic) for X ~ chi-square(df), via the regularized upper incomplete gamma."""

    if df < 1:
        raise ValueError(f"degrees of freedom must be at least 1, got {df}")
    if np.isnan(statistic):
        return float("nan")
    if statistic <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, statistic / 2.0))


def two_sided_normal_p(z: np.ndarray | float) -> np.ndarray | float:
    """Two-sided standard-normal tail probability 2 * Phi(-|z|)."""

    p = 2.0 * special.ndtr(-np.abs(z))
    if np.ndim(p) == 0:
        return float(p)
    return np.minimum(p, 1.0)


__all__ = ["chi_square_upper_tail", "two_sided_normal_p"]
