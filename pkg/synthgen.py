"""Seeded synthetic panels with known cause-specific coefficients.

Latent time for cause k is drawn by inversion from an exponential baseline,
T_k = -ln(U) / (rate * exp(x beta_k)); the observed record is the shortest
latent time, administratively censored at the horizon. Every subject draws
from its own Philox stream (key = seed, counter = subject index), so a subject's
values do not depend on how many subjects come before it.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from constants import COL_COMPANY_EP, COL_COMPANY_PL
from dataset_io import COLUMN_VALUES, CovariateRecipe
from survival_core import CompanyType, EventKind, IntervalRecord

LOGGER = logging.getLogger(__name__)

RNG_ALGORITHM = "Philox-4x64-10"

CovariateColumn = Literal[
    "trafficDelta", "trendsDelta", "weeksSinceFirst", "roundNumber", "hasTrendsData", "companyType"
]

_ALLOWED_DISTRIBUTIONS = {
    "trafficDelta": ("normal", "uniform"),
    "trendsDelta": ("normal", "uniform"),
    "weeksSinceFirst": ("uniform",),
    "roundNumber": ("integer",),
    "hasTrendsData": ("bernoulli",),
    "companyType": ("categorical",),
}

_RECIPE_KEYS = {
    "trafficDelta": "traffic_delta",
    "trendsDelta": "trends_delta",
    "weeksSinceFirst": "weeks_since_first",
    "roundNumber": "round_number",
    "hasTrendsData": "has_trends_data",
    "companyType": "company_type",
}


class ScenarioError(ValueError):
    """Raised when a scenario fails validation; carries the field-level messages."""


class CovariateSpec(BaseModel):
    """Sampling distribution of one covariate."""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    column: CovariateColumn
    distribution: Literal["normal", "uniform", "integer", "bernoulli", "categorical"]
    mean: float = 0.0
    sd: float = Field(1.0, gt=0)
    low: float = 0.0
    high: float = 1.0
    p: float = Field(0.5, ge=0, le=1)
    probabilities: dict[Literal["EP", "PL"], float] = Field(
        default_factory=lambda: {"EP": 0.25, "PL": 0.25}
    )

    @model_validator(mode="after")
    def _check_distribution(self) -> "CovariateSpec":
        allowed = _ALLOWED_DISTRIBUTIONS[self.column]
        if self.distribution not in allowed:
            raise ValueError(
                f"{self.column} must use distribution {' or '.join(allowed)}, got {self.distribution}"
            )
        if self.distribution == "uniform" and not self.low < self.high:
            raise ValueError(f"{self.column}: uniform needs low < high")
        if self.column == "weeksSinceFirst" and self.low < 0:
            raise ValueError("weeksSinceFirst: low must be >= 0")
        if self.distribution == "integer":
            if self.low != int(self.low) or self.high != int(self.high):
                raise ValueError(f"{self.column}: integer bounds must be whole numbers")
            if not 1 <= self.low <= self.high:
                raise ValueError(f"{self.column}: integer bounds need 1 <= low <= high")
        if self.distribution == "categorical":
            if any(value < 0 for value in self.probabilities.values()):
                raise ValueError("companyType: probabilities must be non-negative")
            if sum(self.probabilities.values()) > 1.0:
                raise ValueError("companyType: EP and PL probabilities must sum to at most 1")
        return self

    @property
    def design_columns(self) -> tuple[str, ...]:
        if self.column == "companyType":
            return (COL_COMPANY_EP, COL_COMPANY_PL)
        return (self.column,)


class Scenario(BaseModel):
    """Generator input: sample size, hazard model and censoring."""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    n_subjects: int = Field(gt=0)
    baseline_rate: float = Field(gt=0)
    censor_horizon: float = Field(gt=0)
    seed: int = Field(ge=0, lt=2**64)
    covariates: list[CovariateSpec] = Field(min_length=1)
    beta_by_cause: dict[str, list[float]] = Field(min_length=1)
    record_latent_times: bool = False

    @model_validator(mode="after")
    def _check_model(self) -> "Scenario":
        columns = [spec.column for spec in self.covariates]
        repeated = sorted({c for c in columns if columns.count(c) > 1})
        if repeated:
            raise ValueError(f"covariates repeated: {', '.join(repeated)}")
        width = len(self.design_columns)
        for code, beta in self.beta_by_cause.items():
            kind = EventKind.from_code(code)
            if not kind.is_event:
                raise ValueError("beta_by_cause keys must be VE, MA or IPO")
            if len(beta) != width:
                raise ValueError(
                    f"beta for cause {code} has {len(beta)} entries; the covariates produce "
                    f"{width} design columns ({', '.join(self.design_columns)})"
                )
        return self

    @property
    def design_columns(self) -> tuple[str, ...]:
        return tuple(name for spec in self.covariates for name in spec.design_columns)

    @property
    def causes(self) -> tuple[EventKind, ...]:
        """Causes in fixed EventKind order, which is also the per-subject draw order."""

        present = {EventKind.from_code(code) for code in self.beta_by_cause}
        return tuple(kind for kind in EventKind if kind in present)

    def beta_for(self, kind: EventKind) -> np.ndarray:
        for code, beta in self.beta_by_cause.items():
            if EventKind.from_code(code) is kind:
                return np.asarray(beta, dtype=float)
        raise KeyError(kind.value)

    def recipe(self) -> CovariateRecipe:
        """Recipe whose design columns are exactly this scenario's, in the same order."""

        return CovariateRecipe(tuple(_RECIPE_KEYS[spec.column] for spec in self.covariates))


def validate_scenario(document: dict[str, Any]) -> Scenario:
    try:
        return Scenario.model_validate(document)
    except ValidationError as exc:
        raise ScenarioError(f"invalid scenario\n{exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return validate_scenario(document)


def default_scenario(seed: int = 42) -> Scenario:
    """n = 2000, rate 0.05/week, beta = (0.5, -0.3), about 30% censored."""

    return validate_scenario(
        {
            "n_subjects": 2000,
            "baseline_rate": 0.05,
            "censor_horizon": 24.0,
            "seed": seed,
            "covariates": [
                {"column": "trafficDelta", "distribution": "normal", "mean": 0.0, "sd": 1.0},
                {"column": "hasTrendsData", "distribution": "bernoulli", "p": 0.5},
            ],
            "beta_by_cause": {"VE": [0.5, -0.3]},
        }
    )


# Covariates used, in order, when a scenario is given inline as a beta vector.
INLINE_COVARIATES: tuple[dict[str, Any], ...] = (
    {"column": "trafficDelta", "distribution": "normal", "mean": 0.0, "sd": 1.0},
    {"column": "hasTrendsData", "distribution": "bernoulli", "p": 0.5},
    {"column": "trendsDelta", "distribution": "normal", "mean": 0.0, "sd": 1.0},
    {"column": "weeksSinceFirst", "distribution": "uniform", "low": 0.0, "high": 5.0},
    {"column": "roundNumber", "distribution": "integer", "low": 1, "high": 4},
)


def inline_scenario(
    n_subjects: int, baseline_rate: float, beta: list[float], censor_horizon: float, seed: int
) -> Scenario:
    """Single-cause (VE) scenario over the first len(beta) inline covariates."""

    if not 1 <= len(beta) <= len(INLINE_COVARIATES):
        raise ScenarioError(
            f"inline beta must have between 1 and {len(INLINE_COVARIATES)} entries, got {len(beta)}"
        )
    return validate_scenario(
        {
            "n_subjects": n_subjects,
            "baseline_rate": baseline_rate,
            "censor_horizon": censor_horizon,
            "seed": seed,
            "covariates": list(INLINE_COVARIATES[: len(beta)]),
            "beta_by_cause": {"VE": list(beta)},
        }
    )


@dataclass(frozen=True, eq=False)
class GroundTruth:
    scenario: Scenario
    design_columns: tuple[str, ...]
    tallies: dict[str, int]
    latent_times: tuple[dict[str, float], ...] | None = None
    rng_algorithm: str = RNG_ALGORITHM
    numpy_version: str = field(default_factory=lambda: np.__version__)

    def to_document(self) -> dict[str, Any]:
        document: dict[str, Any] = {
            "scenario": self.scenario.model_dump(mode="json"),
            "design_columns": list(self.design_columns),
            "true_beta": {
                code: dict(zip(self.design_columns, beta))
                for code, beta in self.scenario.beta_by_cause.items()
            },
            "tallies": dict(self.tallies),
            "rng": {"algorithm": self.rng_algorithm, "numpy_version": self.numpy_version},
        }
        if self.latent_times is not None:
            document["latent_times"] = [dict(times) for times in self.latent_times]
        return document


def subject_rng(seed: int, subject: int) -> np.random.Generator:
    """Independent stream for one subject: Philox keyed by the seed, counter at the subject index."""

    counter = np.array([0, 0, 0, subject], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def _draw(spec: CovariateSpec, rng: np.random.Generator) -> Any:
    if spec.distribution == "normal":
        return float(rng.normal(spec.mean, spec.sd))
    if spec.distribution == "uniform":
        return float(rng.uniform(spec.low, spec.high))
    if spec.distribution == "integer":
        return int(rng.integers(int(spec.low), int(spec.high), endpoint=True))
    if spec.distribution == "bernoulli":
        return bool(rng.random() < spec.p)
    u = rng.random()
    p_ep = spec.probabilities.get("EP", 0.0)
    if u < p_ep:
        return CompanyType.ENTERPRISE_PRODUCT
    if u < p_ep + spec.probabilities.get("PL", 0.0):
        return CompanyType.PLATFORM
    return CompanyType.CONSUMER_PRODUCT


def _subject_record(scenario: Scenario, subject: int, rng: np.random.Generator) -> IntervalRecord:
    """Covariates of one subject, as a censored placeholder record."""

    drawn = {spec.column: _draw(spec, rng) for spec in scenario.covariates}
    amount = float(rng.lognormal(0.0, 1.0))

    has_trends = drawn.get("hasTrendsData", "trendsDelta" in drawn)
    trends = drawn.get("trendsDelta", 0.0) if has_trends else None
    round_number = drawn.get("roundNumber", 1)
    return IntervalRecord(
        company_id=f"S{subject:06d}",
        company_type=drawn.get("companyType", CompanyType.CONSUMER_PRODUCT),
        event_kind=EventKind.NO_EVENT,
        investment_amount=amount,
        total_capital_raised=amount * round_number,
        round_name=f"round-{round_number}",
        round_number=round_number,
        weeks_since_first=drawn.get("weeksSinceFirst", 0.0),
        duration_weeks=1.0,
        event_occurred=False,
        has_trends_data=has_trends,
        trends_delta=trends,
        has_traffic_data="trafficDelta" in drawn,
        traffic_delta=drawn.get("trafficDelta"),
    )


def generate(scenario: Scenario) -> tuple[list[IntervalRecord], GroundTruth]:
    """Draw the panel; identical scenarios give identical records."""

    columns = scenario.design_columns
    value_of = [COLUMN_VALUES[name] for name in columns]
    causes = scenario.causes
    betas = [scenario.beta_for(kind) for kind in causes]

    records: list[IntervalRecord] = []
    latent: list[dict[str, float]] = []
    for subject in range(scenario.n_subjects):
        rng = subject_rng(scenario.seed, subject)
        placeholder = _subject_record(scenario, subject, rng)
        x = np.array([fn(placeholder) for fn in value_of], dtype=float)

        times = []
        for beta in betas:
            rate = scenario.baseline_rate * math.exp(min(float(x @ beta), 700.0))
            times.append(-math.log1p(-rng.random()) / rate)
        first = int(np.argmin(times))
        if times[first] > scenario.censor_horizon:
            record = replace(placeholder, duration_weeks=1.0 + scenario.censor_horizon)
        else:
            record = replace(
                placeholder,
                event_kind=causes[first],
                event_occurred=True,
                duration_weeks=1.0 + times[first],
            )
        records.append(record)
        if scenario.record_latent_times:
            latent.append({kind.value: t for kind, t in zip(causes, times)})

    counts = Counter(record.event_kind for record in records)
    truth = GroundTruth(
        scenario=scenario,
        design_columns=columns,
        tallies={kind.value: counts.get(kind, 0) for kind in EventKind},
        latent_times=tuple(latent) if scenario.record_latent_times else None,
    )
    LOGGER.info(
        "Generated %d subjects (seed %d): %s",
        scenario.n_subjects, scenario.seed,
        ", ".join(f"{code}={count}" for code, count in truth.tallies.items()),
    )
    return records, truth


def ground_truth_path(panel_path: str | Path) -> Path:
    panel_path = Path(panel_path)
    return panel_path.with_name(f"{panel_path.stem}.truth.json")


def write_ground_truth(truth: GroundTruth, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(truth.to_document(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


__all__ = [
    "CovariateSpec",
    "GroundTruth",
    "INLINE_COVARIATES",
    "RNG_ALGORITHM",
    "Scenario",
    "ScenarioError",
    "default_scenario",
    "generate",
    "ground_truth_path",
    "inline_scenario",
    "load_scenario",
    "subject_rng",
    "validate_scenario",
    "write_ground_truth",
]
