"""Cox proportional-hazards estimation by maximum partial likelihood.

The log partial likelihood is

    L_p(beta) = sum over event times of [ sum_{failures} x beta - log sum_{R(t)} exp(x beta) ]

with Breslow's generalisation for tied event times (Efron selectable). Risk-set
sums are accumulated from the longest duration down in the log domain, so each
risk set is stabilised by its own maximum linear predictor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from config import FitControls
from scoring import chi_square_upper_tail, two_sided_normal_p
from survival_core import build_risk_index_from_arrays

LOGGER = logging.getLogger(__name__)

# A Newton step longer than this at a claimed optimum means the likelihood is still rising.
_MAX_FINAL_STEP = 0.1
_CONFIDENCE_Z = 1.959963984540054
_MIN_SCALED_EIGENVALUE = 1e-10


class CoxFitError(RuntimeError):
    """Base class for failures while fitting a Cox model."""


class InsufficientEventsError(CoxFitError):
    """Raised when the design has no uncensored records."""


class ConstantColumnError(CoxFitError):
    """Raised when a covariate is constant over every record at risk."""


class CollinearityError(CoxFitError):
    """Raised when the information matrix is singular."""


class LikelihoodOverflowError(CoxFitError):
    """Raised when the partial likelihood produces a non-finite intermediate."""


class _TraceCarryingError(CoxFitError):
    def __init__(self, message: str, trace: Sequence["IterationRecord"]) -> None:
        super().__init__(message)
        self.trace = tuple(trace)


class SeparationError(_TraceCarryingError):
    """Raised when a coefficient diverges while the likelihood keeps increasing."""


class ConvergenceError(_TraceCarryingError):
    """Raised when Newton-Raphson does not converge; carries the iteration trace."""


class TieMethod(Enum):
    BRESLOW = "breslow"
    EFRON = "efron"

    @classmethod
    def from_name(cls, name: "str | TieMethod") -> "TieMethod":
        if isinstance(name, TieMethod):
            return name
        cleaned = str(name).strip().lower()
        for method in cls:
            if method.value == cleaned:
                return method
        raise ValueError(f"unknown tie method {name!r}; expected breslow or efron")


class ColumnKind(Enum):
    CONTINUOUS = "continuous"
    INDICATOR = "indicator"
    INTERACTION = "interaction"


@dataclass(frozen=True)
class DesignColumn:
    name: str
    kind: ColumnKind
    source: str


def _read_only(values: np.ndarray, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Numeric covariates aligned to records, with durations and event flags alongside.

    ``time_scales`` carries per-record time measures (weeks since first
    investment, years since first, the interval's own duration) that time
    interaction columns are built from.
    """

    columns: tuple[DesignColumn, ...]
    values: np.ndarray
    durations: np.ndarray
    events: np.ndarray
    record_ids: tuple[str, ...]
    time_scales: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        n = len(self.record_ids)
        if values.shape != (n, len(self.columns)):
            raise ValueError(
                f"values has shape {values.shape}, expected ({n}, {len(self.columns)})"
            )
        names = [column.name for column in self.columns]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"duplicate column name(s): {', '.join(duplicates)}")
        if not np.all(np.isfinite(values)):
            bad = [names[j] for j in range(values.shape[1]) if not np.all(np.isfinite(values[:, j]))]
            raise ValueError(f"non-finite values in column(s): {', '.join(bad)}")
        for j, column in enumerate(self.columns):
            if column.kind is ColumnKind.INDICATOR and not np.all(np.isin(values[:, j], (0.0, 1.0))):
                raise ValueError(f"indicator column {column.name!r} takes values outside {{0, 1}}")
        durations = np.asarray(self.durations, dtype=float)
        events = np.asarray(self.events, dtype=bool)
        if durations.shape != (n,) or events.shape != (n,):
            raise ValueError("durations and events must align with the records")
        scales = {}
        for name, scale in dict(self.time_scales).items():
            scale = np.asarray(scale, dtype=float)
            if scale.shape != (n,):
                raise ValueError(f"time scale {name!r} must align with the records")
            scales[name] = _read_only(scale)
        object.__setattr__(self, "values", _read_only(values))
        object.__setattr__(self, "durations", _read_only(durations))
        object.__setattr__(self, "events", _read_only(events, dtype=bool))
        object.__setattr__(self, "record_ids", tuple(self.record_ids))
        object.__setattr__(self, "time_scales", MappingProxyType(scales))

    @property
    def n(self) -> int:
        return len(self.record_ids)

    @property
    def k(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(column.name for column in self.columns)

    @property
    def n_events(self) -> int:
        return int(np.count_nonzero(self.events))

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(
                f"unknown covariate {name!r}; design has {', '.join(self.names) or 'no columns'}"
            ) from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def with_events(self, events: Sequence[bool]) -> "DesignMatrix":
        return replace(self, events=np.asarray(events, dtype=bool))

    def with_values(self, values: np.ndarray) -> "DesignMatrix":
        return replace(self, values=values)

    def append_columns(self, columns: Sequence[DesignColumn], values: np.ndarray) -> "DesignMatrix":
        values = np.asarray(values, dtype=float).reshape(self.n, len(columns))
        return replace(
            self,
            columns=self.columns + tuple(columns),
            values=np.hstack([self.values, values]),
        )


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    beta: tuple[float, ...]
    loglik: float
    gradient_max: float
    halvings: int


@dataclass(frozen=True, eq=False)
class CoxFit:
    """Fitted coefficients with their standard errors and global tests."""

    names: tuple[str, ...]
    beta: np.ndarray
    hazard_ratio: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    information: np.ndarray
    variance: np.ndarray
    loglik_null: float
    loglik_fit: float
    lr_stat: float
    wald_stat: float
    score_stat: float
    df: int
    lr_p: float
    wald_p: float
    score_p: float
    concordance: float | None
    rsquare: float
    rsquare_max: float
    n: int
    n_events: int
    ties: TieMethod
    iterations: tuple[IterationRecord, ...]
    converged: bool = True

    @property
    def k(self) -> int:
        return len(self.names)

    @property
    def hazard_ratio_lower(self) -> np.ndarray:
        return np.exp(self.beta - _CONFIDENCE_Z * self.se)

    @property
    def hazard_ratio_upper(self) -> np.ndarray:
        return np.exp(self.beta + _CONFIDENCE_Z * self.se)

    def coefficient(self, name: str) -> float:
        try:
            return float(self.beta[self.names.index(name)])
        except ValueError:
            raise ValueError(f"unknown covariate {name!r}") from None


@dataclass(frozen=True, eq=False)
class _RiskStructure:
    """Duration-sorted, centred covariates plus the failure bookkeeping per event time."""

    record_ids: tuple[str, ...]
    x: np.ndarray
    event_times: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    n_at_risk: np.ndarray
    event_rows: np.ndarray
    group_of_row: np.ndarray
    efron_fraction: np.ndarray


def _prepare(design: DesignMatrix) -> _RiskStructure:
    index = build_risk_index_from_arrays(design.record_ids, design.durations, design.events)
    position = {record_id: i for i, record_id in enumerate(design.record_ids)}
    order = np.fromiter((position[record_id] for record_id in index.record_ids), dtype=np.int64,
                        count=design.n)
    x = design.values[order]
    x = x - x.mean(axis=0) if design.k else x

    n_events = np.asarray(index.n_events)
    starts = np.asarray(index.starts)
    group_of_row = np.repeat(np.arange(index.m), n_events)
    first_row = np.repeat(np.cumsum(n_events) - n_events, n_events)
    within = np.arange(group_of_row.shape[0]) - first_row
    return _RiskStructure(
        record_ids=index.record_ids,
        x=x,
        event_times=np.asarray(index.event_times),
        starts=starts,
        ends=starts + n_events,
        n_at_risk=np.asarray(index.n_at_risk),
        event_rows=np.repeat(starts, n_events) + within,
        group_of_row=group_of_row,
        efron_fraction=within / np.repeat(n_events, n_events),
    )


def _reverse_logcumsumexp(values: np.ndarray) -> np.ndarray:
    """log sum_{j >= i} exp(values_j) for every i, with a -inf row appended."""

    out = np.full((values.shape[0] + 1,) + values.shape[1:], -np.inf)
    if values.shape[0]:
        with np.errstate(invalid="ignore"):
            out[:-1] = np.logaddexp.accumulate(values[::-1], axis=0)[::-1]
    return out


def _normalized_moments(eta: np.ndarray, z: np.ndarray, log_totals: np.ndarray) -> np.ndarray:
    """sum_{j >= i} exp(eta_j) z_j / sum_{j >= i} exp(eta_j), zero past the last record."""

    with np.errstate(divide="ignore", invalid="ignore"):
        log_pos = _reverse_logcumsumexp(eta[:, None] + np.log(np.clip(z, 0.0, None)))
        log_neg = _reverse_logcumsumexp(eta[:, None] + np.log(np.clip(-z, 0.0, None)))
        moments = np.exp(log_pos - log_totals[:, None]) - np.exp(log_neg - log_totals[:, None])
    moments[-1] = 0.0
    return moments


def _overflow_error(structure: _RiskStructure, bad_positions: np.ndarray, what: str) -> LikelihoodOverflowError:
    first_bad = int(np.min(bad_positions))
    affected = np.flatnonzero(structure.starts <= first_bad)
    group = int(affected[-1]) if affected.size else 0
    return LikelihoodOverflowError(
        f"non-finite {what} in the risk set at t={structure.event_times[group]:g} "
        f"(event time {group + 1} of {structure.event_times.shape[0]}, "
        f"{int(structure.n_at_risk[group])} at risk)"
    )


@dataclass(frozen=True, eq=False)
class _FirstOrder:
    eta: np.ndarray
    log_totals: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    remaining: np.ndarray
    fraction: np.ndarray
    denominator: np.ndarray
    expected: np.ndarray
    contributions: np.ndarray


def _first_order(structure: _RiskStructure, beta: np.ndarray, ties: TieMethod) -> _FirstOrder:
    x = structure.x
    with np.errstate(over="ignore", invalid="ignore"):
        eta = x @ beta
    bad = np.flatnonzero(~np.isfinite(eta))
    if bad.size:
        raise _overflow_error(structure, bad, "linear predictor")

    log_totals = _reverse_logcumsumexp(eta)
    first = _normalized_moments(eta, x, log_totals)

    groups = structure.group_of_row
    starts = structure.starts[groups]
    ends = structure.ends[groups]
    log_risk = log_totals[starts]
    # Share of the risk set's weight that lies outside the tied failures.
    remaining = np.exp(log_totals[ends] - log_risk)
    if ties is TieMethod.EFRON:
        fraction = structure.efron_fraction
    else:
        fraction = np.zeros_like(structure.efron_fraction)

    denominator = 1.0 - fraction * (1.0 - remaining)
    mean_risk = first[starts]
    tie_first = mean_risk - remaining[:, None] * first[ends]
    expected = (mean_risk - fraction[:, None] * tie_first) / denominator[:, None]

    contributions = eta[structure.event_rows] - log_risk - np.log(denominator)
    bad = np.flatnonzero(~np.isfinite(contributions) | ~np.all(np.isfinite(expected), axis=1))
    if bad.size:
        raise _overflow_error(structure, structure.event_rows[bad], "risk-set sum")
    return _FirstOrder(eta, log_totals, starts, ends, remaining, fraction, denominator,
                       expected, contributions)


def _evaluate(
    structure: _RiskStructure, beta: np.ndarray, ties: TieMethod, with_hessian: bool = True
) -> tuple[float, np.ndarray, np.ndarray | None]:
    x = structure.x
    n, k = x.shape
    terms = _first_order(structure, beta, ties)
    eta, log_totals = terms.eta, terms.log_totals
    starts, ends = terms.starts, terms.ends
    remaining, fraction, denominator = terms.remaining, terms.fraction, terms.denominator
    expected = terms.expected
    failing_x = x[structure.event_rows]

    loglik = float(terms.contributions.sum())
    gradient = (failing_x - expected).sum(axis=0)
    if not with_hessian:
        return loglik, gradient, None

    outer = (x[:, :, None] * x[:, None, :]).reshape(n, k * k)
    second = _normalized_moments(eta, outer, log_totals).reshape(n + 1, k, k)
    mean_second = second[starts]
    tie_second = mean_second - remaining[:, None, None] * second[ends]
    numerator = mean_second - fraction[:, None, None] * tie_second
    covariance = numerator / denominator[:, None, None] - np.einsum("ri,rj->rij", expected, expected)
    hessian = -covariance.sum(axis=0)
    if not np.all(np.isfinite(hessian)):
        raise LikelihoodOverflowError("non-finite second derivative of the log partial likelihood")
    return loglik, gradient, hessian


def _check_beta(design: DesignMatrix, beta: Sequence[float]) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape != (design.k,):
        raise ValueError(f"beta has length {beta.shape[0]}, design has {design.k} columns")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    return beta


def log_partial_likelihood_derivatives(
    design: DesignMatrix, beta: Sequence[float], ties: TieMethod = TieMethod.BRESLOW
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partial likelihood with its gradient and Hessian at ``beta``."""

    beta = _check_beta(design, beta)
    if design.n_events == 0:
        raise InsufficientEventsError("the partial likelihood needs at least one event")
    loglik, gradient, hessian = _evaluate(_prepare(design), beta, TieMethod.from_name(ties))
    return loglik, gradient, hessian


def log_partial_likelihood(
    design: DesignMatrix, beta: Sequence[float], ties: TieMethod = TieMethod.BRESLOW
) -> float:
    """Log partial likelihood at ``beta``."""

    beta = _check_beta(design, beta)
    if design.n_events == 0:
        raise InsufficientEventsError("the partial likelihood needs at least one event")
    loglik, _, _ = _evaluate(_prepare(design), beta, TieMethod.from_name(ties), with_hessian=False)
    return loglik


@dataclass(frozen=True, eq=False)
class FailureTerms:
    """Per uncensored record: its event time, covariates and risk-set weighted mean.

    Rows are in duration order. Under Efron ties the weighted means of one tied
    group are averaged, so every failure of the group shares one mean.
    """

    record_ids: tuple[str, ...]
    event_times: np.ndarray
    covariates: np.ndarray
    weighted_means: np.ndarray


def failure_terms(
    design: DesignMatrix, beta: Sequence[float], ties: TieMethod | str = TieMethod.BRESLOW
) -> FailureTerms:
    beta = _check_beta(design, beta)
    if design.n_events == 0:
        raise InsufficientEventsError("no uncensored records")
    ties = TieMethod.from_name(ties)
    structure = _prepare(design)
    expected = _first_order(structure, beta, ties).expected
    groups = structure.group_of_row
    if ties is TieMethod.EFRON:
        counts = np.bincount(groups)
        sums = np.zeros((counts.shape[0], design.k))
        np.add.at(sums, groups, expected)
        expected = (sums / counts[:, None])[groups]
    center = design.values.mean(axis=0)
    return FailureTerms(
        record_ids=tuple(structure.record_ids[row] for row in structure.event_rows),
        event_times=_read_only(structure.event_times[groups]),
        covariates=_read_only(structure.x[structure.event_rows] + center),
        weighted_means=_read_only(expected + center),
    )


def _newton_step(information: np.ndarray, gradient: np.ndarray, names: Sequence[str]) -> np.ndarray:
    try:
        return linalg.solve(information, gradient, assume_a="pos", check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise CollinearityError(
            "information matrix is singular or not positive definite; suspect collinearity among "
            f"{', '.join(names)}"
        ) from exc


def _check_information(information: np.ndarray, names: Sequence[str], where: str) -> None:
    """Reject an information matrix whose correlation form is numerically singular."""

    diagonal = np.diag(information)
    if not np.all(diagonal > 0):
        flat = [names[j] for j in np.flatnonzero(~(diagonal > 0))]
        raise CollinearityError(f"no information {where} about: {', '.join(flat)}")
    root = np.sqrt(diagonal)
    smallest = float(np.min(linalg.eigvalsh(information / np.outer(root, root))))
    if smallest < _MIN_SCALED_EIGENVALUE:
        raise CollinearityError(
            f"information matrix {where} is singular (smallest scaled eigenvalue {smallest:.3g}); "
            f"suspect collinearity among {', '.join(names)}"
        )


def _check_constant_columns(design: DesignMatrix, structure: _RiskStructure) -> None:
    at_risk = structure.x[int(structure.starts[0]):]
    constant = [name for name, spread in zip(design.names, np.ptp(at_risk, axis=0)) if spread == 0]
    if constant:
        raise ConstantColumnError(
            f"covariate(s) constant over every record at risk: {', '.join(constant)}"
        )


def _record(iteration: int, beta: np.ndarray, loglik: float, gradient: np.ndarray, halvings: int) -> IterationRecord:
    gradient_max = float(np.max(np.abs(gradient))) if gradient.size else 0.0
    return IterationRecord(iteration, tuple(float(b) for b in beta), loglik, gradient_max, halvings)


def fit_cox(
    design: DesignMatrix,
    ties: TieMethod | str = TieMethod.BRESLOW,
    controls: FitControls | None = None,
) -> CoxFit:
    """Maximise the log partial likelihood by Newton-Raphson with step-halving from beta = 0."""

    ties = TieMethod.from_name(ties)
    controls = controls or FitControls()
    if design.k == 0:
        raise ValueError("the design has no covariate columns")
    if design.n_events == 0:
        raise InsufficientEventsError("cannot fit a Cox model without events")

    structure = _prepare(design)
    _check_constant_columns(design, structure)
    names = design.names

    beta = np.zeros(design.k)
    loglik, gradient, hessian = _evaluate(structure, beta, ties)
    loglik_null, gradient_null, information_null = loglik, gradient.copy(), -hessian
    _check_information(information_null, names, "at beta = 0")
    trace = [_record(0, beta, loglik, gradient, 0)]

    converged = False
    for iteration in range(1, controls.max_iterations + 1):
        step = _newton_step(-hessian, gradient, names)
        scale = 1.0
        accepted = None
        for halvings in range(controls.max_halvings + 1):
            candidate = beta + scale * step
            try:
                evaluated = _evaluate(structure, candidate, ties)
            except LikelihoodOverflowError:
                scale /= 2.0
                continue
            if evaluated[0] > loglik:
                accepted = (candidate, evaluated, halvings)
                break
            scale /= 2.0

        gradient_max = float(np.max(np.abs(gradient)))
        if accepted is None:
            if gradient_max < controls.gradient_tol and np.max(np.abs(step)) <= _MAX_FINAL_STEP:
                converged = True
                break
            if np.max(np.abs(step)) > _MAX_FINAL_STEP and gradient_max < controls.gradient_tol:
                diverging = [names[j] for j in np.flatnonzero(np.abs(step) > _MAX_FINAL_STEP)]
                raise SeparationError(
                    f"likelihood is flat while coefficient(s) keep moving: {', '.join(diverging)}",
                    trace,
                )
            raise ConvergenceError(
                f"step-halving could not increase the log partial likelihood at iteration {iteration}",
                trace,
            )

        candidate, (new_loglik, new_gradient, new_hessian), halvings = accepted
        relative_change = abs(new_loglik - loglik) / max(abs(new_loglik), np.finfo(float).tiny)
        beta, loglik, gradient, hessian = candidate, new_loglik, new_gradient, new_hessian
        trace.append(_record(iteration, beta, loglik, gradient, halvings))
        LOGGER.debug("iteration %d: loglik=%.10g halvings=%d", iteration, loglik, halvings)

        diverging = [names[j] for j in np.flatnonzero(np.abs(beta) > controls.separation_bound)]
        if diverging:
            raise SeparationError(
                f"coefficient(s) exceed |beta| > {controls.separation_bound:g} with the likelihood "
                f"still increasing (monotone likelihood): {', '.join(diverging)}",
                trace,
            )
        if relative_change < controls.loglik_rtol and np.max(np.abs(gradient)) < controls.gradient_tol:
            if np.max(np.abs(_newton_step(-hessian, gradient, names))) <= _MAX_FINAL_STEP:
                converged = True
                break

    if not converged:
        raise ConvergenceError(
            f"Newton-Raphson did not converge in {controls.max_iterations} iterations", trace
        )

    # One more Newton step from the accepted optimum tightens beta to rounding level.
    polish = beta + _newton_step(-hessian, gradient, names)
    try:
        polished = _evaluate(structure, polish, ties)
    except LikelihoodOverflowError:
        polished = None
    if polished is not None and polished[0] >= loglik:
        # The trace only lists steps that raised the likelihood.
        if polished[0] > loglik:
            trace.append(_record(trace[-1].iteration + 1, polish, polished[0], polished[1], 0))
        beta, (loglik, gradient, hessian) = polish, polished

    information = -hessian
    _check_information(information, names, "at the optimum")
    try:
        variance = linalg.inv(information, check_finite=False)
    except linalg.LinAlgError as exc:
        raise CollinearityError("information matrix at the optimum is singular") from exc

    se = np.sqrt(np.diag(variance))
    z = beta / se
    lr_stat = max(2.0 * (loglik - loglik_null), 0.0)
    wald_stat = float(beta @ information @ beta)
    score_stat = float(gradient_null @ _newton_step(information_null, gradient_null, names))
    df = design.k
    linear_predictor = design.values @ beta

    LOGGER.info(
        "fit converged after %d iterations (loglik %.6f -> %.6f, %s ties)",
        len(trace) - 1, loglik_null, loglik, ties.value,
    )
    return CoxFit(
        names=names,
        beta=_read_only(beta),
        hazard_ratio=_read_only(np.exp(beta)),
        se=_read_only(se),
        z=_read_only(z),
        p=_read_only(two_sided_normal_p(z)),
        information=_read_only(information),
        variance=_read_only(variance),
        loglik_null=loglik_null,
        loglik_fit=loglik,
        lr_stat=lr_stat,
        wald_stat=wald_stat,
        score_stat=score_stat,
        df=df,
        lr_p=chi_square_upper_tail(lr_stat, df),
        wald_p=chi_square_upper_tail(wald_stat, df),
        score_p=chi_square_upper_tail(score_stat, df),
        concordance=concordance_index(design.durations, design.events, linear_predictor),
        rsquare=float(1.0 - np.exp(-lr_stat / design.n)),
        rsquare_max=float(1.0 - np.exp(2.0 * loglik_null / design.n)),
        n=design.n,
        n_events=design.n_events,
        ties=ties,
        iterations=tuple(trace),
        converged=True,
    )


def percent_hazard_change(beta_j: float) -> float:
    """Percent change in hazard for a one-unit covariate increase: (exp(beta) - 1) * 100."""

    return float((np.exp(beta_j) - 1.0) * 100.0)


def hazard_ratio_between(fit: CoxFit, x_i: Sequence[float], x_j: Sequence[float]) -> float:
    """exp(beta' (x_i - x_j)): constant hazard ratio between two covariate vectors."""

    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    x_j = np.asarray(x_j, dtype=float).reshape(-1)
    if x_i.shape != (fit.k,) or x_j.shape != (fit.k,):
        raise ValueError(
            f"covariate vectors must have length {fit.k}, got {x_i.shape[0]} and {x_j.shape[0]}"
        )
    return float(np.exp(np.asarray(fit.beta) @ (x_i - x_j)))


def hazard_ratio_for_change(fit: CoxFit, name: str, delta: float) -> float:
    """Hazard ratio for a ``delta``-unit change in one covariate, e.g. 52 weeks."""

    return float(np.exp(fit.coefficient(name) * delta))


def concordance_index(
    durations: Sequence[float], events: Sequence[bool], linear_predictor: Sequence[float]
) -> float | None:
    """Share of comparable pairs whose shorter duration has the higher linear predictor.

    A pair is comparable when the shorter of two distinct durations ends in an
    event, or when an event and a censoring share a duration (the censored
    record counts as the longer survivor). Ties in the predictor count one
    half. None when no pair is comparable.
    """

    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    predictor = np.asarray(linear_predictor, dtype=float)
    order = np.argsort(durations, kind="mergesort")
    durations, events, predictor = durations[order], events[order], predictor[order]
    tie_start = np.searchsorted(durations, durations, side="left")
    later_start = np.searchsorted(durations, durations, side="right")

    concordant = 0.0
    usable = 0
    for i in np.flatnonzero(events):
        tied = slice(tie_start[i], later_start[i])
        tied_censored = predictor[tied][~events[tied]]
        later = np.concatenate([tied_censored, predictor[later_start[i]:]])
        if later.size == 0:
            continue
        usable += later.size
        concordant += np.count_nonzero(later < predictor[i]) + 0.5 * np.count_nonzero(later == predictor[i])
    if usable == 0:
        LOGGER.warning("concordance undefined: no comparable pairs")
        return None
    return float(concordant / usable)


def concordance(design: DesignMatrix, fit: CoxFit) -> float | None:
    """Concordance of the fitted linear predictor with the observed durations."""

    if tuple(fit.names) != design.names:
        raise ValueError("fit and design have different covariates")
    return concordance_index(design.durations, design.events, design.values @ np.asarray(fit.beta))


__all__ = [
    "CollinearityError",
    "ColumnKind",
    "ConstantColumnError",
    "ConvergenceError",
    "CoxFit",
    "CoxFitError",
    "DesignColumn",
    "DesignMatrix",
    "FailureTerms",
    "InsufficientEventsError",
    "IterationRecord",
    "LikelihoodOverflowError",
    "SeparationError",
    "TieMethod",
    "concordance",
    "concordance_index",
    "failure_terms",
    "fit_cox",
    "hazard_ratio_between",
    "hazard_ratio_for_change",
    "log_partial_likelihood",
    "log_partial_likelihood_derivatives",
    "percent_hazard_change",
]
