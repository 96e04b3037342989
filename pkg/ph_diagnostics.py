"""Schoenfeld residuals and the Grambsch-Therneau test of proportional hazards.

Under a time-varying coefficient beta_j(t) = beta_j + theta_j g(t), the scaled
Schoenfeld residuals have expectation close to theta_j g(t). The test is the
score test of theta = 0 for a chosen transform g of the event time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from config import G_TRANSFORMS
from cox_fit import (
    CollinearityError,
    ColumnKind,
    CoxFit,
    DesignColumn,
    DesignMatrix,
    TieMethod,
    failure_terms,
)
from km_logrank import kaplan_meier
from scoring import chi_square_upper_tail
from survival_core import build_risk_index_from_arrays

LOGGER = logging.getLogger(__name__)


class ResidualStateError(RuntimeError):
    """Raised when residuals are requested from, or applied to, the wrong state."""


class DegenerateTimeError(ValueError):
    """Raised when g(t) does not vary across event times."""


@dataclass(frozen=True, eq=False)
class ResidualMatrix:
    """One row per uncensored record, in duration order."""

    event_times: np.ndarray
    record_ids: tuple[str, ...]
    residuals: np.ndarray
    covariate_names: tuple[str, ...]
    # Kaplan-Meier survival just before each row's event time, for the km transform.
    survival_before: np.ndarray
    scaled: np.ndarray | None = None

    @property
    def m(self) -> int:
        return int(self.event_times.shape[0])

    @property
    def is_scaled(self) -> bool:
        return self.scaled is not None


@dataclass(frozen=True)
class CovariatePhTest:
    name: str
    theta: float
    chi_square: float
    p_value: float


@dataclass(frozen=True)
class PhTestReport:
    per_covariate: tuple[CovariatePhTest, ...]
    global_chi_square: float
    global_df: int
    global_p: float
    g_transform: str

    def flagged(self, alpha: float = 0.05) -> list[str]:
        """Covariates whose proportional-hazards test rejects at ``alpha``."""

        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        return [test.name for test in self.per_covariate if test.p_value < alpha]


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.flags.writeable = False
    return array


def schoenfeld_residuals_at(
    design: DesignMatrix, beta: Sequence[float], ties: TieMethod | str = TieMethod.BRESLOW
) -> ResidualMatrix:
    """Residuals x_k - a_k(beta) at an arbitrary coefficient vector."""

    terms = failure_terms(design, beta, ties)
    index = build_risk_index_from_arrays(design.record_ids, design.durations, design.events)
    curve = kaplan_meier(index)
    steps_before = np.searchsorted(curve.times, terms.event_times, side="left")
    before = np.concatenate([[1.0], curve.survival])[steps_before]
    return ResidualMatrix(
        event_times=terms.event_times,
        record_ids=terms.record_ids,
        residuals=_frozen(terms.covariates - terms.weighted_means),
        covariate_names=design.names,
        survival_before=_frozen(before),
    )


def schoenfeld_residuals(design: DesignMatrix, fit: CoxFit) -> ResidualMatrix:
    """Schoenfeld residuals at the fitted coefficients."""

    if not fit.converged:
        raise ResidualStateError("Schoenfeld residuals need a converged fit")
    if tuple(fit.names) != design.names:
        raise ValueError("fit and design have different covariates")
    return schoenfeld_residuals_at(design, fit.beta, fit.ties)


def _variance(fit: CoxFit) -> np.ndarray:
    try:
        return linalg.inv(np.asarray(fit.information), check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise CollinearityError("information matrix is singular; residuals cannot be scaled") from exc


def scale_residuals(resid: ResidualMatrix, fit: CoxFit) -> ResidualMatrix:
    """Scale each residual row by m * I(beta)^-1."""

    if resid.is_scaled:
        raise ResidualStateError("residuals are already scaled")
    if tuple(fit.names) != resid.covariate_names:
        raise ValueError("fit and residuals have different covariates")
    scaled = resid.m * resid.residuals @ _variance(fit)
    return replace(resid, scaled=_frozen(scaled))


def transform_times(resid: ResidualMatrix, g: str) -> np.ndarray:
    """g(t) at every residual row's event time."""

    times = np.asarray(resid.event_times, dtype=float)
    if g == "identity":
        return times
    if g == "log":
        return np.log(times)
    if g == "km":
        return 1.0 - np.asarray(resid.survival_before, dtype=float)
    if g == "rank":
        return stats.rankdata(times)
    raise ValueError(f"unknown time transform {g!r}; expected one of {', '.join(G_TRANSFORMS)}")


def grambsch_therneau_test(resid: ResidualMatrix, fit: CoxFit, g: str = "identity") -> PhTestReport:
    """Per-covariate and global score tests of theta = 0."""

    if not resid.is_scaled:
        raise ResidualStateError("the test needs scaled residuals; call scale_residuals first")
    if tuple(fit.names) != resid.covariate_names:
        raise ValueError("fit and residuals have different covariates")
    k = len(resid.covariate_names)
    m = resid.m
    if m < k + 2:
        raise ValueError(f"the test needs at least {k + 2} events for {k} covariates, got {m}")

    g_values = transform_times(resid, g)
    centred = g_values - g_values.mean()
    spread = float(centred @ centred)
    if np.ptp(g_values) == 0.0 or not spread > 0.0:
        raise DegenerateTimeError(f"g(t) = {g} is constant across all {m} event times")

    variance = _variance(fit)
    score = centred @ np.asarray(resid.residuals)
    weighted = centred @ np.asarray(resid.scaled)
    per_covariate = []
    for j, name in enumerate(resid.covariate_names):
        chi_square = float(weighted[j] ** 2 / (m * variance[j, j] * spread))
        per_covariate.append(
            CovariatePhTest(
                name=name,
                theta=float(weighted[j] / spread),
                chi_square=chi_square,
                p_value=chi_square_upper_tail(chi_square, 1),
            )
        )
    global_chi_square = float(m * score @ variance @ score / spread)
    report = PhTestReport(
        per_covariate=tuple(per_covariate),
        global_chi_square=global_chi_square,
        global_df=k,
        global_p=chi_square_upper_tail(global_chi_square, k),
        g_transform=g,
    )
    LOGGER.info("PH test (g=%s): global chisq=%.4f on %d df", g, global_chi_square, k)
    return report


def augment_with_time_interactions(
    design: DesignMatrix, pairs: Sequence[tuple[str, str]]
) -> DesignMatrix:
    """Append covariate x time-scale product columns named ``covariate:scale``."""

    if not pairs:
        return design
    columns = []
    values = []
    for covariate, scale in pairs:
        source = design.column(covariate)
        if scale not in design.time_scales:
            raise ValueError(
                f"unknown time scale {scale!r}; available: {', '.join(sorted(design.time_scales))}"
            )
        name = f"{covariate}:{scale}"
        if name in design.names or any(column.name == name for column in columns):
            raise ValueError(f"duplicate column name {name!r}")
        columns.append(DesignColumn(name, ColumnKind.INTERACTION, f"{covariate} x {scale}"))
        values.append(source * design.time_scales[scale])
    return design.append_columns(columns, np.column_stack(values))


__all__ = [
    "CovariatePhTest",
    "DegenerateTimeError",
    "PhTestReport",
    "ResidualMatrix",
    "ResidualStateError",
    "augment_with_time_interactions",
    "grambsch_therneau_test",
    "scale_residuals",
    "schoenfeld_residuals",
    "schoenfeld_residuals_at",
    "transform_times",
]
