"""Domain types shared by every stage: interval records, event typing and risk sets."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np


class EmptyInputError(ValueError):
    """Raised when an operation receives no records at all."""


class RecordInvariantError(ValueError):
    """Raised when an interval record violates one of its invariants."""

    def __init__(self, invariant: str, message: str) -> None:
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
        self.detail = message


class EventKind(Enum):
    """Terminal event of an interval, with its panel-file code."""

    VENTURE_EQUITY = "VE"
    MERGER_ACQUISITION = "MA"
    IPO = "IPO"
    NO_EVENT = "NONE"

    @property
    def is_event(self) -> bool:
        return self is not EventKind.NO_EVENT

    @classmethod
    def from_code(cls, code: str) -> "EventKind":
        cleaned = str(code).strip().upper()
        for kind in cls:
            if kind.value == cleaned:
                return kind
        raise ValueError(
            f"unknown event kind {code!r}; expected one of {', '.join(k.value for k in cls)}"
        )


class CompanyType(Enum):
    """Product specialisation of a company, with its panel-file code."""

    CONSUMER_PRODUCT = "CP"
    ENTERPRISE_PRODUCT = "EP"
    PLATFORM = "PL"

    @classmethod
    def from_code(cls, code: str) -> "CompanyType":
        cleaned = str(code).strip().upper()
        for kind in cls:
            if kind.value == cleaned:
                return kind
        raise ValueError(
            f"unknown company type {code!r}; expected one of {', '.join(k.value for k in cls)}"
        )


@dataclass(frozen=True)
class IntervalRecord:
    """Duration between two consecutive events of one company, with its covariates.

    Money is in millions of dollars, times in weeks. ``recensored`` is only set
    by competing-risk recensoring, which keeps the original ``event_kind`` while
    turning the record into a censored one.
    """

    company_id: str
    company_type: CompanyType
    event_kind: EventKind
    investment_amount: float
    total_capital_raised: float
    round_name: str
    round_number: int
    weeks_since_first: float
    duration_weeks: float
    event_occurred: bool
    has_trends_data: bool
    trends_delta: float | None
    has_traffic_data: bool
    traffic_delta: float | None
    recensored: bool = False

    def __post_init__(self) -> None:
        problems = check_record(self)
        if problems:
            raise problems[0]

    @property
    def key(self) -> str:
        return f"{self.company_id}#{self.round_number}"


def check_record(record: IntervalRecord) -> list[RecordInvariantError]:
    """Return every invariant the record violates (empty when valid)."""

    problems: list[RecordInvariantError] = []

    def _finite(value: float) -> bool:
        return bool(np.isfinite(value))

    if not _finite(record.duration_weeks) or record.duration_weeks < 1:
        problems.append(
            RecordInvariantError(
                "duration_at_least_one_week",
                f"duration_weeks must be >= 1, got {record.duration_weeks}",
            )
        )
    if not _finite(record.weeks_since_first) or record.weeks_since_first < 0:
        problems.append(
            RecordInvariantError(
                "weeks_since_first_non_negative",
                f"weeks_since_first must be >= 0, got {record.weeks_since_first}",
            )
        )
    if not _finite(record.investment_amount) or record.investment_amount < 0:
        problems.append(
            RecordInvariantError(
                "investment_amount_non_negative",
                f"investment_amount must be >= 0, got {record.investment_amount}",
            )
        )
    if not _finite(record.total_capital_raised) or record.total_capital_raised < 0:
        problems.append(
            RecordInvariantError(
                "total_capital_non_negative",
                f"total_capital_raised must be >= 0, got {record.total_capital_raised}",
            )
        )
    if record.round_number < 1:
        problems.append(
            RecordInvariantError(
                "round_number_positive", f"round_number must be >= 1, got {record.round_number}"
            )
        )
    expected_flag = record.event_kind.is_event and not record.recensored
    if record.event_occurred != expected_flag:
        problems.append(
            RecordInvariantError(
                "event_flag_matches_kind",
                f"event_occurred={record.event_occurred} contradicts event kind "
                f"{record.event_kind.value}" + (" (recensored)" if record.recensored else ""),
            )
        )
    if record.recensored and not record.event_kind.is_event:
        problems.append(
            RecordInvariantError(
                "recensored_requires_event", "only event-bearing records can be recensored"
            )
        )
    if record.has_trends_data != (record.trends_delta is not None):
        problems.append(
            RecordInvariantError(
                "trends_delta_presence",
                "trends_delta must be present exactly when has_trends_data is true",
            )
        )
    elif record.trends_delta is not None and not _finite(record.trends_delta):
        problems.append(RecordInvariantError("trends_delta_finite", "trends_delta must be finite"))
    if record.has_traffic_data != (record.traffic_delta is not None):
        problems.append(
            RecordInvariantError(
                "traffic_delta_presence",
                "traffic_delta must be present exactly when has_traffic_data is true",
            )
        )
    elif record.traffic_delta is not None and not _finite(record.traffic_delta):
        problems.append(RecordInvariantError("traffic_delta_finite", "traffic_delta must be finite"))
    return problems


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class RiskSetIndex:
    """Distinct event times with their risk sets and failure sets.

    Records are held in duration order (failures before censorings at equal
    durations). The risk set of the i-th event time is the suffix of that order
    starting at ``starts[i]``; its failures occupy the next ``n_events[i]`` slots.
    """

    record_ids: tuple[str, ...]
    durations: np.ndarray
    events: np.ndarray
    event_times: np.ndarray
    starts: np.ndarray
    n_at_risk: np.ndarray
    n_events: np.ndarray

    @property
    def m(self) -> int:
        return int(self.event_times.shape[0])

    @property
    def n(self) -> int:
        return len(self.record_ids)

    def risk_set(self, i: int) -> frozenset[str]:
        return frozenset(self.record_ids[int(self.starts[i]):])

    def failure_set(self, i: int) -> frozenset[str]:
        start = int(self.starts[i])
        return frozenset(self.record_ids[start:start + int(self.n_events[i])])

    def iter_sets(self) -> Iterator[tuple[float, frozenset[str], frozenset[str]]]:
        for i in range(self.m):
            yield float(self.event_times[i]), self.risk_set(i), self.failure_set(i)


def unique_record_ids(records: Sequence[IntervalRecord]) -> list[str]:
    """Record keys, with repeated keys disambiguated independently of input order."""

    counts = Counter(record.key for record in records)
    ids = [record.key for record in records]
    for key, count in counts.items():
        if count == 1:
            continue
        positions = [i for i, record in enumerate(records) if record.key == key]
        positions.sort(key=lambda i: _record_sort_key(records[i]))
        for rank, position in enumerate(positions, start=1):
            ids[position] = key if rank == 1 else f"{key}~{rank}"
    return ids


def _record_sort_key(record: IntervalRecord) -> tuple:
    return (
        record.duration_weeks,
        record.weeks_since_first,
        record.event_kind.value,
        record.round_name,
        record.investment_amount,
        record.total_capital_raised,
    )


def build_risk_index_from_arrays(
    record_ids: Sequence[str], durations: Sequence[float], events: Sequence[bool]
) -> RiskSetIndex:
    """Build the index from parallel arrays of identifiers, durations and event flags."""

    ids = list(record_ids)
    if not ids:
        raise EmptyInputError("cannot build a risk-set index from zero records")
    times = np.asarray(durations, dtype=float)
    flags = np.asarray(events, dtype=bool)
    if times.shape != (len(ids),) or flags.shape != (len(ids),):
        raise ValueError("record_ids, durations and events must have the same length")
    if len(set(ids)) != len(ids):
        raise ValueError("record identifiers must be unique")
    if not np.all(np.isfinite(times)) or np.any(times < 1):
        raise ValueError("all durations must be finite and at least one week")

    # Sort on duration, failures first, then identifier so the order does not
    # depend on the input order.
    id_rank = np.empty(len(ids), dtype=np.int64)
    id_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
    order = np.lexsort((id_rank, ~flags, times))
    sorted_times = times[order]
    sorted_flags = flags[order]
    sorted_ids = tuple(ids[i] for i in order)

    event_times, n_events = np.unique(sorted_times[sorted_flags], return_counts=True)
    starts = np.searchsorted(sorted_times, event_times, side="left")
    n_at_risk = len(ids) - starts

    return RiskSetIndex(
        record_ids=sorted_ids,
        durations=_frozen(sorted_times),
        events=_frozen(sorted_flags),
        event_times=_frozen(event_times),
        starts=_frozen(starts.astype(np.int64)),
        n_at_risk=_frozen(n_at_risk.astype(np.int64)),
        n_events=_frozen(n_events.astype(np.int64)),
    )


def build_risk_index(records: Sequence[IntervalRecord]) -> RiskSetIndex:
    """Risk sets and failure sets at every distinct uncensored duration."""

    if not records:
        raise EmptyInputError("cannot build a risk-set index from an empty record list")
    return build_risk_index_from_arrays(
        unique_record_ids(records),
        [record.duration_weeks for record in records],
        [record.event_occurred for record in records],
    )


__all__ = [
    "CompanyType",
    "EmptyInputError",
    "EventKind",
    "IntervalRecord",
    "RecordInvariantError",
    "RiskSetIndex",
    "build_risk_index",
    "build_risk_index_from_arrays",
    "check_record",
    "unique_record_ids",
]
