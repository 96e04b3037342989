"""Rendering of analysis results as TSV tables and JSON documents."""
from __future__ import annotations

import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

from competing_risks import CompetingRiskReport, FailedFit, InsufficientEvents
from constants import (
    FIT_TABLE_COLUMNS,
    FOOTER_NOTES,
    LR_TEST_LABEL,
    SCORE_TEST_LABEL,
    WALD_TEST_LABEL,
)
from cox_fit import CoxFit
from dataset_io import PanelSummary, RowRejection
from km_logrank import SurvivalCurve
from ph_diagnostics import PhTestReport, ResidualMatrix
from text_utils import format_number


def _frame_tsv(frame: pd.DataFrame, index: bool = False) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, sep="\t", index=index, lineterminator="\n")
    return buffer.getvalue()


def _formatted(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.apply(lambda column: column.map(format_number))


def json_number(value: Any) -> Any:
    """Plain float for JSON; None for NaN and infinities."""

    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def to_json(document: Mapping[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def fit_table(fit: CoxFit) -> pd.DataFrame:
    return pd.DataFrame(
        {
            FIT_TABLE_COLUMNS[0]: list(fit.names),
            FIT_TABLE_COLUMNS[1]: np.asarray(fit.beta),
            FIT_TABLE_COLUMNS[2]: np.asarray(fit.hazard_ratio),
            FIT_TABLE_COLUMNS[3]: np.asarray(fit.se),
            FIT_TABLE_COLUMNS[4]: np.asarray(fit.z),
            FIT_TABLE_COLUMNS[5]: np.asarray(fit.p),
        }
    )


def _global_tests(fit: CoxFit) -> list[tuple[str, float, float]]:
    return [
        (LR_TEST_LABEL, fit.lr_stat, fit.lr_p),
        (WALD_TEST_LABEL, fit.wald_stat, fit.wald_p),
        (SCORE_TEST_LABEL, fit.score_stat, fit.score_p),
    ]


def render_fit_tsv(fit: CoxFit, title: str) -> str:
    table = fit_table(fit)
    table[list(FIT_TABLE_COLUMNS[1:])] = _formatted(table[list(FIT_TABLE_COLUMNS[1:])])
    lines = [f"# {title}", _frame_tsv(table).rstrip("\n")]
    lines.append(f"Concordance\t{format_number(fit.concordance)}")
    lines.append(f"Rsquare\t{format_number(fit.rsquare)}\t(max possible {format_number(fit.rsquare_max)})")
    for label, statistic, p_value in _global_tests(fit):
        lines.append(f"{label}\t{format_number(statistic)}\ton {fit.df} df\tp={format_number(p_value)}")
    lines.append(
        f"# n={fit.n}, events={fit.n_events}, ties={fit.ties.value}, "
        f"loglik null={format_number(fit.loglik_null)}, fit={format_number(fit.loglik_fit)}"
    )
    lines.extend(f"# note: {note}" for note in FOOTER_NOTES)
    return "\n".join(lines) + "\n"


def fit_document(fit: CoxFit, title: str) -> dict[str, Any]:
    return {
        "title": title,
        "coefficients": [
            {
                "name": name,
                "beta": json_number(fit.beta[j]),
                "exp_beta": json_number(fit.hazard_ratio[j]),
                "exp_beta_lower_95": json_number(fit.hazard_ratio_lower[j]),
                "exp_beta_upper_95": json_number(fit.hazard_ratio_upper[j]),
                "se": json_number(fit.se[j]),
                "z": json_number(fit.z[j]),
                "p": json_number(fit.p[j]),
            }
            for j, name in enumerate(fit.names)
        ],
        "concordance": json_number(fit.concordance),
        "rsquare": json_number(fit.rsquare),
        "rsquare_max": json_number(fit.rsquare_max),
        "tests": [
            {"name": label, "statistic": json_number(stat), "df": fit.df, "p": json_number(p)}
            for label, stat, p in _global_tests(fit)
        ],
        "loglik_null": json_number(fit.loglik_null),
        "loglik_fit": json_number(fit.loglik_fit),
        "n": fit.n,
        "n_events": fit.n_events,
        "ties": fit.ties.value,
        "iterations": len(fit.iterations) - 1,
        "notes": list(FOOTER_NOTES),
    }


def render_ph_tsv(report: PhTestReport, alpha: float) -> str:
    flagged = set(report.flagged(alpha))
    table = pd.DataFrame(
        {
            "covariate": [test.name for test in report.per_covariate],
            "theta": [format_number(test.theta) for test in report.per_covariate],
            "chisq": [format_number(test.chi_square) for test in report.per_covariate],
            "p": [format_number(test.p_value) for test in report.per_covariate],
            "flag": ["non-proportional" if test.name in flagged else "" for test in report.per_covariate],
        }
    )
    lines = [
        f"# Proportional hazards test of scaled Schoenfeld residuals, g(t) = {report.g_transform}, "
        f"flag at p < {format_number(alpha)}",
        _frame_tsv(table).rstrip("\n"),
        f"GLOBAL\t\t{format_number(report.global_chi_square)}\t{format_number(report.global_p)}"
        f"\t{report.global_df} df",
    ]
    return "\n".join(lines) + "\n"


def ph_document(report: PhTestReport, alpha: float) -> dict[str, Any]:
    return {
        "g_transform": report.g_transform,
        "alpha": alpha,
        "covariates": [
            {
                "name": test.name,
                "theta": json_number(test.theta),
                "chi_square": json_number(test.chi_square),
                "p": json_number(test.p_value),
                "flagged": test.p_value < alpha,
            }
            for test in report.per_covariate
        ],
        "global": {
            "chi_square": json_number(report.global_chi_square),
            "df": report.global_df,
            "p": json_number(report.global_p),
        },
    }


def residual_table(resid: ResidualMatrix) -> pd.DataFrame:
    """event_time, one column per covariate, and the scaled columns when present."""

    data: dict[str, Any] = {"event_time": np.asarray(resid.event_times)}
    for j, name in enumerate(resid.covariate_names):
        data[name] = np.asarray(resid.residuals)[:, j]
    if resid.scaled is not None:
        for j, name in enumerate(resid.covariate_names):
            data[f"scaled:{name}"] = np.asarray(resid.scaled)[:, j]
    return pd.DataFrame(data)


def write_residuals(resid: ResidualMatrix, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    residual_table(resid).to_csv(path, sep="\t", index=False, lineterminator="\n", float_format="%.15g")
    return path


def render_summary_tsv(summary: PanelSummary) -> str:
    blocks = [
        ("Event types present in the dataset", summary.event_counts),
        ("Investment amount distribution (in millions $)", summary.amount_summary),
        ("Round number distribution", summary.round_summary),
        ("Company types present in the dataset", summary.company_counts),
        ("Times between events (in weeks)", summary.duration_summary),
        ("Kaplan-Meier quartiles of time to event (in weeks)", summary.km_quartiles),
        ("Search trends delta distribution", summary.trends_summary),
        ("Website traffic delta distribution", summary.traffic_summary),
        ("Social feedback coverage", summary.coverage),
    ]
    parts = []
    for title, frame in blocks:
        parts.append(f"# {title}\n" + _frame_tsv(_formatted(frame), index=True))
    if summary.logrank is not None:
        result = summary.logrank
        parts.append(
            "# Logrank test across event types\n"
            f"chisq\t{format_number(result.chi_square)}\n"
            f"df\t{result.df}\n"
            f"p\t{format_number(result.p_value)}\n"
        )
    return "\n".join(parts)


def _frame_records(frame: pd.DataFrame) -> dict[str, dict[str, Any]]:
    return {
        str(label): {str(column): json_number(value) for column, value in row.items()}
        for label, row in frame.iterrows()
    }


def summary_document(summary: PanelSummary) -> dict[str, Any]:
    document: dict[str, Any] = {
        "n_records": summary.n_records,
        "event_counts": _frame_records(summary.event_counts),
        "amount_summary": _frame_records(summary.amount_summary),
        "round_summary": _frame_records(summary.round_summary),
        "company_counts": _frame_records(summary.company_counts),
        "duration_summary": _frame_records(summary.duration_summary),
        "km_quartiles": _frame_records(summary.km_quartiles),
        "trends_summary": _frame_records(summary.trends_summary),
        "traffic_summary": _frame_records(summary.traffic_summary),
        "coverage": _frame_records(summary.coverage),
        "logrank": None,
    }
    if summary.logrank is not None:
        document["logrank"] = {
            "chi_square": json_number(summary.logrank.chi_square),
            "df": summary.logrank.df,
            "p": json_number(summary.logrank.p_value),
            "observed": list(summary.logrank.observed),
            "expected": [json_number(value) for value in summary.logrank.expected],
        }
    return document


def curve_table(curves: Mapping[str, SurvivalCurve]) -> pd.DataFrame:
    rows = [
        {
            "group": label,
            "time": step.time,
            "n_at_risk": step.n_at_risk,
            "n_events": step.n_events,
            "survival": step.survival,
        }
        for label, curve in curves.items()
        for step in curve.steps
    ]
    return pd.DataFrame(rows, columns=["group", "time", "n_at_risk", "n_events", "survival"])


def write_curves(curves: Mapping[str, SurvivalCurve], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    curve_table(curves).to_csv(path, sep="\t", index=False, lineterminator="\n", float_format="%.15g")
    return path


def _cause_title(result) -> str:
    return f"Cause {result.cause.label}: {result.n_events} events"


def render_competing_tsv(report: CompetingRiskReport) -> str:
    blocks = []
    for result in report.per_cause:
        if isinstance(result.fit, InsufficientEvents):
            blocks.append(f"# {_cause_title(result)}\n# insufficient events: {result.fit.reason}\n")
        elif isinstance(result.fit, FailedFit):
            reason = " ".join(result.fit.message.split())
            blocks.append(f"# {_cause_title(result)}\n# fit failed: {result.fit.error_type}: {reason}\n")
        else:
            blocks.append(render_fit_tsv(result.fit, _cause_title(result)))
    partition = "\t".join(f"{name}={count}" for name, count in report.event_partition().items())
    blocks.append(f"# event partition (n={report.n})\t{partition}\n")
    return "\n".join(blocks)


def competing_document(report: CompetingRiskReport) -> dict[str, Any]:
    causes = []
    for result in report.per_cause:
        entry: dict[str, Any] = {
            "cause": result.cause.name,
            "kinds": sorted(kind.value for kind in result.cause.included_kinds),
            "n_events": result.n_events,
        }
        if isinstance(result.fit, InsufficientEvents):
            entry["insufficient_events"] = result.fit.reason
        elif isinstance(result.fit, FailedFit):
            entry["fit_failed"] = {"error": result.fit.error_type, "message": result.fit.message}
        else:
            entry["fit"] = fit_document(result.fit, _cause_title(result))
        causes.append(entry)
    return {"causes": causes, "event_partition": report.event_partition(), "n": report.n}


def render_rejections(rejections: Sequence[RowRejection]) -> str:
    return "".join(
        f"line {r.line} ({r.company_name}): {r.invariant}: {r.message}\n" for r in rejections
    )


def emit(text: str, path: str | Path | None) -> None:
    """Write to ``path``, or to stdout when no path is given."""

    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


__all__ = [
    "competing_document",
    "curve_table",
    "emit",
    "fit_document",
    "fit_table",
    "json_number",
    "ph_document",
    "render_competing_tsv",
    "render_fit_tsv",
    "render_ph_tsv",
    "render_rejections",
    "render_summary_tsv",
    "residual_table",
    "summary_document",
    "to_json",
    "write_curves",
    "write_residuals",
]
