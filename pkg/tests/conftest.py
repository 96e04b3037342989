"""Shared builders for the test suite."""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np
import pytest

from cox_fit import ColumnKind, DesignColumn, DesignMatrix
from survival_core import CompanyType, EventKind, IntervalRecord
from synthgen import Scenario, validate_scenario


def make_record(**overrides) -> IntervalRecord:
    """A valid VE record; keyword arguments replace individual fields."""

    base = IntervalRecord(
        company_id="acme",
        company_type=CompanyType.CONSUMER_PRODUCT,
        event_kind=EventKind.VENTURE_EQUITY,
        investment_amount=2.5,
        total_capital_raised=4.0,
        round_name="Series A",
        round_number=2,
        weeks_since_first=30.0,
        duration_weeks=20.0,
        event_occurred=True,
        has_trends_data=True,
        trends_delta=10.44,
        has_traffic_data=True,
        traffic_delta=-5.0,
    )
    return replace(base, **overrides)


def make_design(
    durations: Sequence[float],
    events: Sequence[bool],
    x: np.ndarray,
    names: Sequence[str] | None = None,
) -> DesignMatrix:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    names = names or [f"x{j}" for j in range(x.shape[1])]
    durations = np.asarray(durations, dtype=float)
    return DesignMatrix(
        columns=tuple(DesignColumn(name, ColumnKind.CONTINUOUS, name) for name in names),
        values=x,
        durations=durations,
        events=np.asarray(events, dtype=bool),
        record_ids=tuple(f"r{i}" for i in range(len(durations))),
        time_scales={"weeksSinceLast": durations},
    )


def simulate_design(
    rng: np.random.Generator,
    n: int,
    beta: Sequence[float],
    rate: float = 0.05,
    horizon: float = 24.0,
) -> DesignMatrix:
    """Exponential-baseline proportional hazards data with normal covariates."""

    beta = np.asarray(beta, dtype=float)
    x = rng.normal(size=(n, beta.shape[0]))
    latent = rng.exponential(size=n) / (rate * np.exp(x @ beta))
    events = latent <= horizon
    durations = 1.0 + np.minimum(latent, horizon)
    return make_design(durations, events, x)


def simulate_time_varying(
    rng: np.random.Generator,
    n: int,
    beta0: float = 0.5,
    theta: float = 0.0,
    rate: float = 0.05,
    horizon: float = 24.0,
) -> DesignMatrix:
    """Binary covariate with coefficient beta0 + theta * t, sampled by inverting the cumulative hazard."""

    x = (rng.random(n) < 0.5).astype(float)
    draw = rng.exponential(size=n)
    slope = x * theta
    scale = rate * np.exp(x * beta0)
    with np.errstate(divide="ignore", invalid="ignore"):
        argument = 1.0 + draw * slope / scale
        curved = np.where(argument > 0, np.log(argument) / slope, np.inf)
    latent = np.where(slope == 0.0, draw / scale, curved)
    events = latent <= horizon
    durations = 1.0 + np.minimum(latent, horizon)
    return make_design(durations, events, x)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def three_cause_scenario(n_subjects: int = 400, seed: int = 3) -> Scenario:
    return validate_scenario(
        {
            "n_subjects": n_subjects,
            "baseline_rate": 0.03,
            "censor_horizon": 24.0,
            "seed": seed,
            "covariates": [
                {"column": "trafficDelta", "distribution": "normal", "mean": 0.0, "sd": 1.0},
                {"column": "hasTrendsData", "distribution": "bernoulli", "p": 0.5},
            ],
            "beta_by_cause": {"VE": [0.5, -0.3], "MA": [0.2, 0.4], "IPO": [-0.5, 0.1]},
        }
    )


def single_ipo_panel(records: Sequence[IntervalRecord]) -> list[IntervalRecord]:
    """Every IPO after the first becomes an acquisition, leaving one IPO event."""

    ipo_positions = [i for i, r in enumerate(records) if r.event_kind is EventKind.IPO]
    return [
        replace(r, event_kind=EventKind.MERGER_ACQUISITION) if i in ipo_positions[1:] else r
        for i, r in enumerate(records)
    ]
