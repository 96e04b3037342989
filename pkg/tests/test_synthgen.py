import json
from pathlib import Path

import numpy as np
import pytest

from cox_fit import fit_cox
from dataset_io import build_design
from survival_core import EventKind
from synthgen import (
    RNG_ALGORITHM,
    ScenarioError,
    default_scenario,
    generate,
    ground_truth_path,
    inline_scenario,
    load_scenario,
    validate_scenario,
    write_ground_truth,
)
from tests.conftest import three_cause_scenario

SAMPLE_SCENARIO = Path(__file__).resolve().parent.parent / "sample_data" / "scenario.json"


def test_same_scenario_gives_identical_records():
    scenario = three_cause_scenario(n_subjects=100)
    first, _ = generate(scenario)
    second, _ = generate(scenario)
    assert first == second


def test_subjects_do_not_depend_on_sample_size():
    small, _ = generate(three_cause_scenario(n_subjects=40))
    large, _ = generate(three_cause_scenario(n_subjects=100))
    assert large[:40] == small


def test_different_seeds_differ():
    first, _ = generate(three_cause_scenario(n_subjects=50, seed=1))
    second, _ = generate(three_cause_scenario(n_subjects=50, seed=2))
    assert first != second


def test_censoring_at_the_horizon():
    scenario = default_scenario(seed=3).model_copy(update={"n_subjects": 300})
    records, truth = generate(scenario)
    censored = [r for r in records if not r.event_occurred]
    assert censored
    assert all(r.event_kind is EventKind.NO_EVENT for r in censored)
    assert all(r.duration_weeks == 1.0 + scenario.censor_horizon for r in censored)
    assert all(1.0 <= r.duration_weeks <= 1.0 + scenario.censor_horizon for r in records)
    assert sum(truth.tallies.values()) == 300
    assert truth.tallies["NONE"] == len(censored)


def test_event_kinds_follow_the_scenario_causes():
    records, truth = generate(three_cause_scenario(n_subjects=300))
    assert {r.event_kind for r in records} <= set(EventKind)
    assert all(truth.tallies[code] > 0 for code in ("VE", "MA", "IPO"))


def test_latent_times_are_recorded_on_request():
    scenario = three_cause_scenario(n_subjects=20).model_copy(update={"record_latent_times": True})
    records, truth = generate(scenario)
    assert len(truth.latent_times) == 20
    for record, times in zip(records, truth.latent_times):
        assert set(times) == {"VE", "MA", "IPO"}
        if record.event_occurred:
            assert record.duration_weeks == pytest.approx(1.0 + min(times.values()))
            assert min(times, key=times.get) == record.event_kind.value


def test_ground_truth_sidecar(tmp_path):
    scenario = three_cause_scenario(n_subjects=10)
    _, truth = generate(scenario)
    path = write_ground_truth(truth, ground_truth_path(tmp_path / "panel.tsv"))
    assert path.name == "panel.truth.json"
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["true_beta"]["VE"] == {"trafficDelta": 0.5, "hasTrendsData": -0.3}
    assert document["rng"]["algorithm"] == RNG_ALGORITHM
    assert document["design_columns"] == ["trafficDelta", "hasTrendsData"]
    assert "latent_times" not in document


def test_scenario_validation_errors():
    document = three_cause_scenario().model_dump(mode="json")
    document["beta_by_cause"]["VE"] = [0.5]
    with pytest.raises(ScenarioError, match="design columns"):
        validate_scenario(document)

    document = three_cause_scenario().model_dump(mode="json")
    document["baseline_rate"] = -1.0
    with pytest.raises(ScenarioError):
        validate_scenario(document)

    document = three_cause_scenario().model_dump(mode="json")
    document["covariates"][1]["distribution"] = "normal"
    with pytest.raises(ScenarioError, match="bernoulli"):
        validate_scenario(document)

    document = three_cause_scenario().model_dump(mode="json")
    document["beta_by_cause"]["NONE"] = [0.0, 0.0]
    with pytest.raises(ScenarioError):
        validate_scenario(document)


def test_sample_scenario_loads_and_matches_default_recipe_columns():
    scenario = load_scenario(SAMPLE_SCENARIO)
    assert scenario.design_columns == (
        "trafficDelta", "trendsDelta", "weeksSinceFirst", "roundNumber",
        "hasTrendsData", "companyType=EP", "companyType=PL",
    )
    assert scenario.recipe().column_names == scenario.design_columns


def test_inline_scenario_uses_leading_covariates():
    scenario = inline_scenario(100, 0.05, [0.5, -0.3, 0.2], 24.0, 9)
    assert scenario.design_columns == ("trafficDelta", "hasTrendsData", "trendsDelta")
    with pytest.raises(ScenarioError):
        inline_scenario(100, 0.05, [0.1] * 6, 24.0, 9)


@pytest.mark.slow
def test_default_scenario_coefficients_are_recovered():
    """Bias under 0.03, three-se intervals cover in at least 95% of runs, 95% intervals near nominal."""

    truth = np.array([0.5, -0.3])
    estimates = []
    covered = []
    within_three_se = []
    for seed in range(400):
        scenario = default_scenario(seed=seed)
        records, _ = generate(scenario)
        fit = fit_cox(build_design(records, scenario.recipe()))
        estimates.append(fit.beta)
        covered.append(np.abs(fit.beta - truth) <= 1.959963984540054 * fit.se)
        within_three_se.append(np.abs(fit.beta - truth) <= 3.0 * fit.se)
    assert np.all(np.abs(np.mean(estimates, axis=0) - truth) < 0.03)
    assert np.all(np.mean(within_three_se, axis=0) >= 0.95)
    coverage = np.mean(covered, axis=0)
    assert np.all((coverage >= 0.92) & (coverage <= 0.98))
