"""Panel file IO, covariate construction and descriptive summaries."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from constants import (
    COL_COMPANY_EP,
    COL_COMPANY_PL,
    COL_HAS_TRAFFIC,
    COL_HAS_TRENDS,
    COL_LOG_AMOUNT,
    COL_LOG_CAPITAL,
    COL_ROUND_NUMBER,
    COL_TRAFFIC_DELTA,
    COL_TRENDS_DELTA,
    COL_TRENDS_SIGN,
    COL_WEEKS_SINCE_FIRST,
    PANEL_COLUMNS,
    SCALE_WEEKS_SINCE_FIRST,
    SCALE_WEEKS_SINCE_LAST,
    SCALE_YEARS_SINCE_FIRST,
    WEEKS_PER_YEAR,
)
from cox_fit import ColumnKind, DesignColumn, DesignMatrix
from km_logrank import LogrankResult, SurvivalCurve, kaplan_meier, logrank_test
from ph_diagnostics import augment_with_time_interactions
from survival_core import (
    CompanyType,
    EmptyInputError,
    EventKind,
    IntervalRecord,
    RecordInvariantError,
    build_risk_index,
    build_risk_index_from_arrays,
    unique_record_ids,
)

LOGGER = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("Min", "1st Qtl.", "Median", "Mean", "3rd Qtl.", "Max")
EVENT_LABELS = {
    EventKind.VENTURE_EQUITY: "Venture Equity",
    EventKind.MERGER_ACQUISITION: "M&A",
    EventKind.IPO: "IPO",
    EventKind.NO_EVENT: "No Event",
}
COMPANY_LABELS = {
    CompanyType.CONSUMER_PRODUCT: "Consumer Product",
    CompanyType.ENTERPRISE_PRODUCT: "Enterprise Product",
    CompanyType.PLATFORM: "Platform",
}


class SchemaError(ValueError):
    """Raised when a panel file's header or shape does not match the schema."""


@dataclass(frozen=True)
class RowRejection:
    line: int
    company_name: str
    invariant: str
    message: str


@dataclass(frozen=True)
class Panel:
    """Validated records of one panel file plus the rows that were rejected."""

    records: tuple[IntervalRecord, ...]
    rejections: tuple[RowRejection, ...] = ()
    source: str | None = None

    def __iter__(self) -> Iterator[IntervalRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _delimiter_for(path: Path, delimiter: str | None) -> str:
    if delimiter is not None:
        return delimiter
    return "," if path.suffix.lower() == ".csv" else "\t"


def _parse_flag(value: str, column: str) -> bool:
    cleaned = value.strip()
    if cleaned == "1":
        return True
    if cleaned == "0":
        return False
    raise ValueError(f"{column} must be 0 or 1, got {value!r}")


def _parse_float(value: str, column: str) -> float:
    try:
        number = float(value.strip())
    except ValueError:
        raise ValueError(f"{column} is not a number: {value!r}") from None
    if not math.isfinite(number):
        raise ValueError(f"{column} must be finite, got {value!r}")
    return number


def _parse_optional_float(value: str, column: str) -> float | None:
    if value.strip() == "":
        return None
    return _parse_float(value, column)


def _parse_int(value: str, column: str) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise ValueError(f"{column} is not an integer: {value!r}") from None


def _record_from_row(row: dict[str, str]) -> IntervalRecord:
    return IntervalRecord(
        company_id=row["company_name"],
        company_type=CompanyType.from_code(row["company_type"]),
        event_kind=EventKind.from_code(row["investment_type"]),
        investment_amount=_parse_float(row["investment_amount_musd"], "investment_amount_musd"),
        total_capital_raised=_parse_float(row["total_capital_raised_musd"], "total_capital_raised_musd"),
        round_name=row["round_name"],
        round_number=_parse_int(row["round_number"], "round_number"),
        weeks_since_first=_parse_float(row["weeks_since_first"], "weeks_since_first"),
        duration_weeks=_parse_float(row["weeks_since_last"], "weeks_since_last"),
        event_occurred=_parse_flag(row["event_occurred"], "event_occurred"),
        has_trends_data=_parse_flag(row["has_trends_data"], "has_trends_data"),
        trends_delta=_parse_optional_float(row["trends_delta_pct"], "trends_delta_pct"),
        has_traffic_data=_parse_flag(row["has_traffic_data"], "has_traffic_data"),
        traffic_delta=_parse_optional_float(row["traffic_delta_pct"], "traffic_delta_pct"),
    )


def load_panel(path: str | Path, delimiter: str | None = None) -> Panel:
    """Read and validate a panel file; invalid rows are reported, not dropped silently."""

    path = Path(path)
    sep = _delimiter_for(path, delimiter)
    try:
        frame = pd.read_csv(
            path, sep=sep, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: file is empty") from exc
    frame.columns = [str(column).strip() for column in frame.columns]

    header = list(frame.columns)
    missing = [column for column in PANEL_COLUMNS if column not in header]
    extra = [column for column in header if column not in PANEL_COLUMNS]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing columns: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected columns: {', '.join(extra)}")
        raise SchemaError(f"{path}: header does not match the panel schema ({'; '.join(parts)})")
    # Blank lines stay in the frame so row positions map to file lines.
    frame = frame.fillna("")
    rows = [
        (position + 2, row)
        for position, row in enumerate(frame.to_dict(orient="records"))
        if any(str(value).strip() for value in row.values())
    ]
    if not rows:
        raise SchemaError(f"{path}: panel has a header but no rows")

    records: list[IntervalRecord] = []
    rejections: list[RowRejection] = []
    for line, row in rows:
        try:
            records.append(_record_from_row(row))
        except RecordInvariantError as exc:
            rejections.append(RowRejection(line, row["company_name"], exc.invariant, exc.detail))
        except ValueError as exc:
            rejections.append(RowRejection(line, row["company_name"], "parse", str(exc)))

    if rejections:
        LOGGER.warning("%s: rejected %d of %d rows", path, len(rejections), len(rows))
    LOGGER.info("Loaded %d records from %s", len(records), path)
    return Panel(records=tuple(records), rejections=tuple(rejections), source=str(path))


def _format_float(value: float) -> str:
    return repr(float(value))


def write_panel(records: Sequence[IntervalRecord], path: str | Path, delimiter: str | None = None) -> Path:
    """Serialise records in the panel schema; load_panel reads them back unchanged."""

    path = Path(path)
    rows = []
    for record in records:
        if record.recensored:
            raise ValueError(f"record {record.key} is recensored and has no panel-file form")
        rows.append(
            {
                "company_name": record.company_id,
                "company_type": record.company_type.value,
                "investment_type": record.event_kind.value,
                "investment_amount_musd": _format_float(record.investment_amount),
                "total_capital_raised_musd": _format_float(record.total_capital_raised),
                "round_name": record.round_name,
                "round_number": str(record.round_number),
                "weeks_since_first": _format_float(record.weeks_since_first),
                "weeks_since_last": _format_float(record.duration_weeks),
                "event_occurred": "1" if record.event_occurred else "0",
                "has_trends_data": "1" if record.has_trends_data else "0",
                "trends_delta_pct": "" if record.trends_delta is None else _format_float(record.trends_delta),
                "has_traffic_data": "1" if record.has_traffic_data else "0",
                "traffic_delta_pct": "" if record.traffic_delta is None else _format_float(record.traffic_delta),
            }
        )
    frame = pd.DataFrame(rows, columns=list(PANEL_COLUMNS))
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path, sep=_delimiter_for(path, delimiter), index=False, encoding="utf-8", lineterminator="\n"
    )
    LOGGER.info("Wrote %d records to %s", len(rows), path)
    return path


# Covariate constructors: recipe key -> design columns with their per-record value.
_Constructor = tuple[tuple[DesignColumn, Callable[[IntervalRecord], float]], ...]


def _trends(record: IntervalRecord) -> float:
    return record.trends_delta if record.trends_delta is not None else 0.0


def _traffic(record: IntervalRecord) -> float:
    return record.traffic_delta if record.traffic_delta is not None else 0.0


CONSTRUCTORS: dict[str, _Constructor] = {
    "log_total_capital": (
        (DesignColumn(COL_LOG_CAPITAL, ColumnKind.CONTINUOUS, "ln(1 + total_capital_raised)"),
         lambda r: math.log1p(r.total_capital_raised)),
    ),
    "round_number": (
        (DesignColumn(COL_ROUND_NUMBER, ColumnKind.CONTINUOUS, "round_number"),
         lambda r: float(r.round_number)),
    ),
    "weeks_since_first": (
        (DesignColumn(COL_WEEKS_SINCE_FIRST, ColumnKind.CONTINUOUS, "weeks_since_first"),
         lambda r: r.weeks_since_first),
    ),
    "traffic_delta": (
        (DesignColumn(COL_TRAFFIC_DELTA, ColumnKind.CONTINUOUS, "traffic_delta, 0 when absent"), _traffic),
    ),
    "has_trends_data": (
        (DesignColumn(COL_HAS_TRENDS, ColumnKind.INDICATOR, "has_trends_data"),
         lambda r: float(r.has_trends_data)),
    ),
    "trends_delta": (
        (DesignColumn(COL_TRENDS_DELTA, ColumnKind.CONTINUOUS, "trends_delta, 0 when absent"), _trends),
    ),
    "trends_delta_sign": (
        (DesignColumn(COL_TRENDS_SIGN, ColumnKind.INDICATOR, "1 if trends_delta > 0"),
         lambda r: 1.0 if _trends(r) > 0 else 0.0),
    ),
    "company_type": (
        (DesignColumn(COL_COMPANY_EP, ColumnKind.INDICATOR, "company_type == EP"),
         lambda r: float(r.company_type is CompanyType.ENTERPRISE_PRODUCT)),
        (DesignColumn(COL_COMPANY_PL, ColumnKind.INDICATOR, "company_type == PL"),
         lambda r: float(r.company_type is CompanyType.PLATFORM)),
    ),
    "has_traffic_data": (
        (DesignColumn(COL_HAS_TRAFFIC, ColumnKind.INDICATOR, "has_traffic_data"),
         lambda r: float(r.has_traffic_data)),
    ),
    "log_investment_amount": (
        (DesignColumn(COL_LOG_AMOUNT, ColumnKind.CONTINUOUS, "ln(1 + investment_amount)"),
         lambda r: math.log1p(r.investment_amount)),
    ),
}

COLUMN_VALUES: dict[str, Callable[[IntervalRecord], float]] = {
    column.name: value_of for constructor in CONSTRUCTORS.values() for column, value_of in constructor
}

DEFAULT_CONSTRUCTORS = (
    "log_total_capital",
    "round_number",
    "weeks_since_first",
    "traffic_delta",
    "has_trends_data",
    "trends_delta",
    "trends_delta_sign",
    "company_type",
)


class RecipeDocument(BaseModel):
    """JSON form of a covariate recipe."""

    covariates: list[str] = Field(default_factory=lambda: list(DEFAULT_CONSTRUCTORS), min_length=1)
    time_interactions: list[tuple[str, str]] = Field(default_factory=list)


@dataclass(frozen=True)
class CovariateRecipe:
    """Ordered covariate constructors plus optional covariate x time-scale interactions."""

    constructors: tuple[str, ...] = DEFAULT_CONSTRUCTORS
    time_interactions: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.constructors:
            raise ValueError("a recipe needs at least one covariate constructor")
        unknown = [key for key in self.constructors if key not in CONSTRUCTORS]
        if unknown:
            raise ValueError(
                f"unknown covariate constructor(s): {', '.join(unknown)}; "
                f"available: {', '.join(CONSTRUCTORS)}"
            )
        repeated = sorted({key for key in self.constructors if self.constructors.count(key) > 1})
        if repeated:
            raise ValueError(f"repeated covariate constructor(s): {', '.join(repeated)}")
        object.__setattr__(self, "constructors", tuple(self.constructors))
        object.__setattr__(
            self, "time_interactions", tuple((str(c), str(s)) for c, s in self.time_interactions)
        )

    @property
    def column_names(self) -> tuple[str, ...]:
        names = [column.name for key in self.constructors for column, _ in CONSTRUCTORS[key]]
        names.extend(f"{covariate}:{scale}" for covariate, scale in self.time_interactions)
        return tuple(names)

    @classmethod
    def from_json(cls, path: str | Path) -> "CovariateRecipe":
        path = Path(path)
        try:
            document = RecipeDocument.model_validate(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
        except ValidationError as exc:
            raise ValueError(f"{path}: invalid recipe\n{exc}") from exc
        return cls(tuple(document.covariates), tuple(document.time_interactions))


def time_scales_for(records: Sequence[IntervalRecord]) -> dict[str, np.ndarray]:
    """Per-record time measures available to time-interaction columns."""

    weeks_since_first = np.array([record.weeks_since_first for record in records], dtype=float)
    return {
        SCALE_YEARS_SINCE_FIRST: weeks_since_first / WEEKS_PER_YEAR,
        SCALE_WEEKS_SINCE_FIRST: weeks_since_first,
        SCALE_WEEKS_SINCE_LAST: np.array([record.duration_weeks for record in records], dtype=float),
    }


def build_design(records: Sequence[IntervalRecord], recipe: CovariateRecipe | None = None) -> DesignMatrix:
    """Covariate matrix for the records, in the recipe's column order."""

    records = list(records)
    if not records:
        raise EmptyInputError("cannot build a design from zero records")
    recipe = recipe or CovariateRecipe()
    columns: list[DesignColumn] = []
    values: list[list[float]] = []
    for key in recipe.constructors:
        for column, value_of in CONSTRUCTORS[key]:
            columns.append(column)
            values.append([value_of(record) for record in records])

    design = DesignMatrix(
        columns=tuple(columns),
        values=np.array(values, dtype=float).T,
        durations=np.array([record.duration_weeks for record in records], dtype=float),
        events=np.array([record.event_occurred for record in records], dtype=bool),
        record_ids=tuple(unique_record_ids(records)),
        time_scales=time_scales_for(records),
    )
    return augment_with_time_interactions(design, recipe.time_interactions)


@dataclass(frozen=True, eq=False)
class PanelSummary:
    """Descriptive tables of a panel, one DataFrame per table."""

    n_records: int
    event_counts: pd.DataFrame
    amount_summary: pd.DataFrame
    round_summary: pd.DataFrame
    company_counts: pd.DataFrame
    duration_summary: pd.DataFrame
    km_quartiles: pd.DataFrame
    trends_summary: pd.DataFrame
    traffic_summary: pd.DataFrame
    coverage: pd.DataFrame
    curves: dict[str, SurvivalCurve]
    logrank: LogrankResult | None


def _distribution(values: Sequence[float], with_mean: bool = True) -> dict[str, float]:
    ordered = pd.Series(np.sort(np.asarray(values, dtype=float)))
    quartiles = ordered.quantile([0.25, 0.5, 0.75], interpolation="linear")
    row = {
        "Min": float(ordered.iloc[0]),
        "1st Qtl.": float(quartiles.iloc[0]),
        "Median": float(quartiles.iloc[1]),
        "Mean": float(ordered.mean()),
        "3rd Qtl.": float(quartiles.iloc[2]),
        "Max": float(ordered.iloc[-1]),
    }
    if not with_mean:
        del row["Mean"]
    return row


def _distribution_frame(rows: dict[str, Sequence[float]], with_mean: bool = True) -> pd.DataFrame:
    columns = [c for c in SUMMARY_COLUMNS if with_mean or c != "Mean"]
    labels = [label for label, values in rows.items() if len(values)]
    return pd.DataFrame(
        [_distribution(rows[label], with_mean) for label in labels],
        index=pd.Index(labels, name="group"),
        columns=columns,
    )


def _counts_frame(labels: Sequence[str], counts: Sequence[int], total: int) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "count": list(counts) + [total],
            "percent": [100.0 * c / total for c in counts] + [100.0],
        },
        index=list(labels) + ["Total"],
    )
    frame.index.name = "group"
    return frame


def summarize_panel(records: Sequence[IntervalRecord]) -> PanelSummary:
    """Event, amount, round, company-type, duration and social-feedback summaries."""

    records = list(records)
    if not records:
        raise EmptyInputError("cannot summarise an empty panel")
    n = len(records)
    by_kind = {kind: [r for r in records if r.event_kind is kind] for kind in EventKind}
    event_kinds_present = [k for k in EventKind if k.is_event and by_kind[k]]

    event_counts = _counts_frame(
        [EVENT_LABELS[k] for k in EventKind], [len(by_kind[k]) for k in EventKind], n
    )
    amounts = {EVENT_LABELS[k]: [r.investment_amount for r in by_kind[k]] for k in event_kinds_present}
    amounts["Total"] = [r.investment_amount for r in records]
    company_counts = _counts_frame(
        [COMPANY_LABELS[c] for c in CompanyType],
        [sum(1 for r in records if r.company_type is c) for c in CompanyType],
        n,
    )
    durations = {"All entries": [r.duration_weeks for r in records]}
    durations.update(
        {EVENT_LABELS[k]: [r.duration_weeks for r in by_kind[k]] for k in event_kinds_present}
    )

    ids = unique_record_ids(records)
    kind_indices = {
        kind: build_risk_index_from_arrays(
            [ids[i] for i, r in enumerate(records) if r.event_kind is kind],
            [r.duration_weeks for r in by_kind[kind]],
            [r.event_occurred for r in by_kind[kind]],
        )
        for kind in event_kinds_present
    }
    curves = {"All entries": kaplan_meier(build_risk_index(records))}
    for kind in event_kinds_present:
        curves[EVENT_LABELS[kind]] = kaplan_meier(kind_indices[kind])
    km_quartiles = pd.DataFrame(
        [list(curve.quartiles or (None, None, None)) for curve in curves.values()],
        index=pd.Index(list(curves), name="group"),
        columns=["1st Qtl.", "Median", "3rd Qtl."],
        dtype=float,
    )

    logrank = None
    if len(event_kinds_present) >= 2:
        logrank = logrank_test([kind_indices[k] for k in event_kinds_present])

    trends = [r.trends_delta for r in records if r.trends_delta is not None]
    traffic = [r.traffic_delta for r in records if r.traffic_delta is not None]
    companies = {r.company_id for r in records}
    trend_companies = {r.company_id for r in records if r.has_trends_data}
    traffic_companies = {r.company_id for r in records if r.has_traffic_data}
    coverage = pd.DataFrame(
        {
            "entries": [len(trends), len(traffic)],
            "entries_percent": [100.0 * len(trends) / n, 100.0 * len(traffic) / n],
            "companies": [len(trend_companies), len(traffic_companies)],
            "companies_percent": [
                100.0 * len(trend_companies) / len(companies),
                100.0 * len(traffic_companies) / len(companies),
            ],
            "total_entries": [n, n],
            "total_companies": [len(companies), len(companies)],
        },
        index=["trends", "traffic"],
    )
    coverage.index.name = "group"

    return PanelSummary(
        n_records=n,
        event_counts=event_counts,
        amount_summary=_distribution_frame(amounts),
        round_summary=_distribution_frame({"All entries": [float(r.round_number) for r in records]}),
        company_counts=company_counts,
        duration_summary=_distribution_frame(durations, with_mean=False),
        km_quartiles=km_quartiles,
        trends_summary=_distribution_frame({"trendsDelta": trends}),
        traffic_summary=_distribution_frame({"trafficDelta": traffic}),
        coverage=coverage,
        curves=curves,
        logrank=logrank,
    )


__all__ = [
    "COLUMN_VALUES",
    "CONSTRUCTORS",
    "CovariateRecipe",
    "DEFAULT_CONSTRUCTORS",
    "Panel",
    "PanelSummary",
    "RecipeDocument",
    "RowRejection",
    "SchemaError",
    "build_design",
    "load_panel",
    "summarize_panel",
    "time_scales_for",
    "write_panel",
]
