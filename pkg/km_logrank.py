"""Kaplan-Meier product-limit estimation and the k-sample logrank test."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from scoring import chi_square_upper_tail
from survival_core import RiskSetIndex

# Absorbs one rounding step per product term when comparing survival to 1 - p.
_QUANTILE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SurvivalStep:
    time: float
    n_at_risk: int
    n_events: int
    survival: float


@dataclass(frozen=True)
class SurvivalCurve:
    """Right-continuous step estimate of S(t), one step per distinct event time."""

    steps: tuple[SurvivalStep, ...]
    quartiles: tuple[float | None, float | None, float | None] | None
    degenerate: bool = False

    def survival_at(self, t: float) -> float:
        value = 1.0
        for step in self.steps:
            if step.time > t:
                break
            value = step.survival
        return value

    def survival_before(self, t: float) -> float:
        value = 1.0
        for step in self.steps:
            if step.time >= t:
                break
            value = step.survival
        return value

    @property
    def times(self) -> np.ndarray:
        return np.array([step.time for step in self.steps], dtype=float)

    @property
    def survival(self) -> np.ndarray:
        return np.array([step.survival for step in self.steps], dtype=float)


@dataclass(frozen=True)
class LogrankResult:
    chi_square: float
    df: int
    p_value: float
    observed: tuple[int, ...]
    expected: tuple[float, ...]


def kaplan_meier(index: RiskSetIndex) -> SurvivalCurve:
    """Product-limit estimate over the index's distinct event times."""

    if index.m == 0:
        return SurvivalCurve(steps=(), quartiles=None, degenerate=True)

    steps: list[SurvivalStep] = []
    survival = 1.0
    for time, n_i, d_i in zip(index.event_times, index.n_at_risk, index.n_events):
        survival = survival * (int(n_i) - int(d_i)) / int(n_i)
        steps.append(
            SurvivalStep(time=float(time), n_at_risk=int(n_i), n_events=int(d_i), survival=survival)
        )

    curve = SurvivalCurve(steps=tuple(steps), quartiles=None)
    quartiles = tuple(survival_quantile(curve, p) for p in (0.25, 0.5, 0.75))
    return SurvivalCurve(steps=curve.steps, quartiles=quartiles)


def survival_quantile(curve: SurvivalCurve, p: float) -> float | None:
    """Smallest event time with S(t) <= 1 - p; None when the curve never gets there."""

    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile probability must lie in (0, 1), got {p}")
    target = 1.0 - p
    for step in curve.steps:
        if step.survival <= target + _QUANTILE_TOLERANCE:
            return step.time
    return None


def kaplan_meier_by_group(indices: Mapping[Hashable, RiskSetIndex]) -> dict[Hashable, SurvivalCurve]:
    """One curve per group label, in the mapping's order."""

    return {label: kaplan_meier(index) for label, index in indices.items()}


def _same_group(first: RiskSetIndex, second: RiskSetIndex) -> bool:
    if first is second:
        return True
    return (
        first.record_ids == second.record_ids
        and np.array_equal(first.durations, second.durations)
        and np.array_equal(first.events, second.events)
    )


def logrank_test(groups: Sequence[RiskSetIndex]) -> LogrankResult:
    """k-sample logrank test of identical survival functions.

    Expected counts come from the pooled risk sets; the variance is the
    hypergeometric form with the (n - d) / (n - 1) tie correction, and times
    with a single subject at risk contribute no variance.
    """

    if len(groups) < 2:
        raise ValueError(f"the logrank test needs at least two groups, got {len(groups)}")
    for position, group in enumerate(groups):
        if group.n == 0:
            raise ValueError(f"group {position} has no members")

    # Record keys are only unique within one index, so groups built separately may
    # share keys; only a group passed twice is rejected.
    for position, group in enumerate(groups):
        for earlier in range(position):
            if _same_group(groups[earlier], group):
                raise ValueError(
                    f"group {position} repeats group {earlier}; groups must be disjoint"
                )

    durations = np.concatenate([np.asarray(group.durations) for group in groups])
    events = np.concatenate([np.asarray(group.events) for group in groups])
    labels = np.concatenate(
        [np.full(group.n, position, dtype=np.int64) for position, group in enumerate(groups)]
    )
    if not np.any(events):
        raise ValueError("the logrank test needs at least one event across all groups")

    n_groups = len(groups)
    order = np.argsort(-durations, kind="mergesort")
    durations = durations[order]
    events = events[order]
    labels = labels[order]

    at_risk = np.zeros(n_groups, dtype=np.int64)
    observed = np.zeros(n_groups, dtype=np.int64)
    expected = np.zeros(n_groups, dtype=float)
    covariance = np.zeros((n_groups, n_groups), dtype=float)

    n_samples = durations.shape[0]
    k = 0
    # Walk from the longest duration down so at_risk accumulates the risk sets.
    while k < n_samples:
        time = durations[k]
        deaths = np.zeros(n_groups, dtype=np.int64)
        while k < n_samples and durations[k] == time:
            at_risk[labels[k]] += 1
            if events[k]:
                deaths[labels[k]] += 1
            k += 1

        total_events = int(deaths.sum())
        if total_events == 0:
            continue
        observed += deaths
        total_at_risk = k
        expected += at_risk * total_events / total_at_risk
        if total_at_risk > 1:
            share = at_risk / total_at_risk
            multiplier = total_events * (total_at_risk - total_events) / (total_at_risk - 1)
            covariance += multiplier * (np.diag(share) - np.outer(share, share))

    df = n_groups - 1
    difference = (observed - expected)[:df]
    statistic = float(difference @ np.linalg.pinv(covariance[:df, :df]) @ difference)
    statistic = max(statistic, 0.0)
    return LogrankResult(
        chi_square=statistic,
        df=df,
        p_value=chi_square_upper_tail(statistic, df),
        observed=tuple(int(value) for value in observed),
        expected=tuple(float(value) for value in expected),
    )


__all__ = [
    "LogrankResult",
    "SurvivalCurve",
    "SurvivalStep",
    "kaplan_meier",
    "kaplan_meier_by_group",
    "logrank_test",
    "survival_quantile",
]
