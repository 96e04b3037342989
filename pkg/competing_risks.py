"""Cause-specific Cox models for latent competing risks.

Each cause is fitted on its own, with events of every other kind treated as
right-censored at their observed duration.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from config import FitControls
from cox_fit import CoxFit, CoxFitError, DesignMatrix, TieMethod, fit_cox
from dataset_io import CovariateRecipe, build_design
from survival_core import EmptyInputError, EventKind, IntervalRecord

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class CauseSpec:
    """A named cause: the event kinds counted as its events."""

    name: str
    included_kinds: frozenset[EventKind]

    def __post_init__(self) -> None:
        if not self.name.strip() or "=" in self.name:
            raise ValueError(f"cause name must be non-empty and contain no '=', got {self.name!r}")
        kinds = frozenset(self.included_kinds)
        if not kinds:
            raise ValueError(f"cause {self.name!r} includes no event kinds")
        if EventKind.NO_EVENT in kinds:
            raise ValueError(f"cause {self.name!r} cannot include NONE")
        object.__setattr__(self, "included_kinds", kinds)

    @classmethod
    def parse(cls, text: str) -> "CauseSpec":
        """Parse ``name=KIND[,KIND...]``, e.g. ``exit=MA,IPO``."""

        name, sep, kinds = text.partition("=")
        if not sep:
            raise ValueError(f"cause must look like name=KIND[,KIND...], got {text!r}")
        return cls(name.strip(), frozenset(EventKind.from_code(code) for code in kinds.split(",") if code.strip()))

    @property
    def label(self) -> str:
        codes = sorted(kind.value for kind in self.included_kinds)
        return f"{self.name}={','.join(codes)}"


DEFAULT_CAUSES = (
    CauseSpec("financing", frozenset({EventKind.VENTURE_EQUITY})),
    CauseSpec("exit", frozenset({EventKind.MERGER_ACQUISITION, EventKind.IPO})),
)


@dataclass(frozen=True)
class InsufficientEvents:
    """Stands in for a cause's fit when the cause has no events to fit."""

    cause: CauseSpec
    n_events: int
    reason: str


@dataclass(frozen=True)
class FailedFit:
    """Stands in for a cause's fit when fitting raised; the other causes are unaffected."""

    cause: CauseSpec
    n_events: int
    error_type: str
    message: str


@dataclass(frozen=True, eq=False)
class CauseResult:
    cause: CauseSpec
    n_events: int
    fit: CoxFit | InsufficientEvents | FailedFit

    @property
    def fitted(self) -> bool:
        return isinstance(self.fit, CoxFit)


@dataclass(frozen=True, eq=False)
class CompetingRiskReport:
    per_cause: tuple[CauseResult, ...]
    covariate_names: tuple[str, ...]
    n: int
    n_no_event: int
    n_outside_causes: int
    ties: TieMethod

    @property
    def failures(self) -> tuple[CauseResult, ...]:
        return tuple(result for result in self.per_cause if isinstance(result.fit, FailedFit))

    def event_partition(self) -> dict[str, int]:
        """Event counts per cause plus the censored and uncovered remainder; sums to n."""

        partition = {result.cause.name: result.n_events for result in self.per_cause}
        partition["no_event"] = self.n_no_event
        partition["outside_causes"] = self.n_outside_causes
        return partition

    def result(self, name: str) -> CauseResult:
        for result in self.per_cause:
            if result.cause.name == name:
                return result
        raise KeyError(name)


def recensor_by_cause(records: Iterable[IntervalRecord], cause: CauseSpec) -> list[IntervalRecord]:
    """Censor every event whose kind is outside the cause; durations stay as observed."""

    return [
        replace(record, event_occurred=False, recensored=True)
        if record.event_occurred and record.event_kind not in cause.included_kinds
        else record
        for record in records
    ]


def check_disjoint(causes: Sequence[CauseSpec]) -> None:
    if not causes:
        raise ValueError("at least one cause is required")
    names = [cause.name for cause in causes]
    repeated = sorted({name for name in names if names.count(name) > 1})
    if repeated:
        raise ValueError(f"repeated cause name(s): {', '.join(repeated)}")
    for i, first in enumerate(causes):
        for second in causes[i + 1:]:
            shared = first.included_kinds & second.included_kinds
            if shared:
                raise ValueError(
                    f"causes {first.name!r} and {second.name!r} share event kind(s) "
                    f"{', '.join(sorted(kind.value for kind in shared))}"
                )


def _fit_cause(
    records: Sequence[IntervalRecord],
    design: DesignMatrix,
    cause: CauseSpec,
    ties: TieMethod,
    controls: FitControls | None,
) -> CauseResult:
    recensored = recensor_by_cause(records, cause)
    events = [record.event_occurred for record in recensored]
    n_events = sum(events)
    if n_events == 0:
        LOGGER.warning("cause %s has no events after recensoring; fit skipped", cause.label)
        return CauseResult(
            cause, 0, InsufficientEvents(cause, 0, "no events of this cause after recensoring")
        )
    LOGGER.info("Fitting cause %s (%d events)", cause.label, n_events)
    try:
        fit = fit_cox(design.with_events(events), ties, controls)
    except CoxFitError as exc:
        LOGGER.error("cause %s could not be fitted: %s", cause.label, exc)
        return CauseResult(cause, n_events, FailedFit(cause, n_events, type(exc).__name__, str(exc)))
    return CauseResult(cause, n_events, fit)


def fit_competing(
    records: Sequence[IntervalRecord],
    recipe: CovariateRecipe | None = None,
    causes: Sequence[CauseSpec] = DEFAULT_CAUSES,
    ties: TieMethod | str = TieMethod.BRESLOW,
    controls: FitControls | None = None,
    workers: int = 1,
) -> CompetingRiskReport:
    """One Cox fit per cause on identically constructed covariates."""

    records = list(records)
    if not records:
        raise EmptyInputError("cannot fit competing risks on zero records")
    causes = tuple(causes)
    check_disjoint(causes)
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    ties = TieMethod.from_name(ties)
    design = build_design(records, recipe)

    def run(cause: CauseSpec) -> CauseResult:
        return _fit_cause(records, design, cause, ties, controls)

    if workers > 1 and len(causes) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(causes))) as pool:
            results = tuple(pool.map(run, causes))
    else:
        results = tuple(run(cause) for cause in causes)

    covered = frozenset().union(*(cause.included_kinds for cause in causes))
    return CompetingRiskReport(
        per_cause=results,
        covariate_names=design.names,
        n=len(records),
        n_no_event=sum(1 for r in records if r.event_kind is EventKind.NO_EVENT),
        n_outside_causes=sum(
            1 for r in records if r.event_occurred and r.event_kind not in covered
        ),
        ties=ties,
    )


__all__ = [
    "CauseResult",
    "CauseSpec",
    "CompetingRiskReport",
    "DEFAULT_CAUSES",
    "FailedFit",
    "InsufficientEvents",
    "check_disjoint",
    "fit_competing",
    "recensor_by_cause",
]
