from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from cox_fit import TieMethod, fit_cox, log_partial_likelihood_derivatives
from ph_diagnostics import (
    DegenerateTimeError,
    ResidualStateError,
    augment_with_time_interactions,
    grambsch_therneau_test,
    scale_residuals,
    schoenfeld_residuals,
    schoenfeld_residuals_at,
    transform_times,
)
from tests.conftest import make_design, simulate_design, simulate_time_varying


def _scaled(design, ties=TieMethod.BRESLOW):
    fit = fit_cox(design, ties)
    return fit, scale_residuals(schoenfeld_residuals(design, fit), fit)


def test_residuals_sum_to_zero_at_the_fitted_coefficients(rng):
    design = simulate_design(rng, 500, [0.5, -0.3])
    fit = fit_cox(design)
    resid = schoenfeld_residuals(design, fit)
    assert resid.m == design.n_events
    np.testing.assert_allclose(np.asarray(resid.residuals).sum(axis=0), 0.0, atol=1e-6)


@pytest.mark.parametrize("ties", ["breslow", "efron"])
def test_residual_sum_equals_score_at_any_beta(rng, ties):
    design = simulate_design(rng, 200, [0.3, 0.2])
    tied = make_design(np.ceil(design.durations / 3.0), design.events, design.values)
    beta = np.array([0.7, -0.4])
    resid = schoenfeld_residuals_at(tied, beta, ties)
    _, gradient, _ = log_partial_likelihood_derivatives(tied, beta, TieMethod.from_name(ties))
    np.testing.assert_allclose(np.asarray(resid.residuals).sum(axis=0), gradient, atol=1e-9)


def test_residual_rows_follow_event_time_order(rng):
    design = simulate_design(rng, 100, [0.5])
    fit = fit_cox(design)
    resid = schoenfeld_residuals(design, fit)
    assert np.all(np.diff(resid.event_times) >= 0)
    assert resid.covariate_names == ("x0",)
    assert not resid.is_scaled

def test_residuals_are_invariant_to_location_shift(rng):
    design = simulate_design(rng, 300, [0.5, -0.3])
    shifted = design.with_values(design.values + np.array([50.0, -3.0]))
    first = schoenfeld_residuals(design, fit_cox(design))
    second = schoenfeld_residuals(shifted, fit_cox(shifted))
    np.testing.assert_array_equal(second.event_times, first.event_times)
    np.testing.assert_allclose(second.residuals, first.residuals, rtol=1e-6, atol=1e-8)



def test_scaling_uses_event_count_times_inverse_information(rng):
    design = simulate_design(rng, 300, [0.5, -0.3])
    fit = fit_cox(design)
    resid = schoenfeld_residuals(design, fit)
    scaled = scale_residuals(resid, fit)
    expected = resid.m * np.asarray(resid.residuals) @ np.linalg.inv(fit.information)
    np.testing.assert_allclose(scaled.scaled, expected, rtol=1e-10, atol=1e-12)


def test_residual_state_errors(rng):
    design = simulate_design(rng, 200, [0.5])
    fit, scaled = _scaled(design)
    with pytest.raises(ResidualStateError, match="already scaled"):
        scale_residuals(scaled, fit)
    with pytest.raises(ResidualStateError, match="scaled residuals"):
        grambsch_therneau_test(schoenfeld_residuals(design, fit), fit)
    with pytest.raises(ResidualStateError, match="converged"):
        schoenfeld_residuals(design, replace(fit, converged=False))


def test_three_events_suffice_for_one_covariate():
    design = make_design([1, 2, 3, 4, 5], [True, True, False, True, False], [0.3, -0.2, 0.9, 0.1, -1.0])
    fit, scaled = _scaled(design)
    assert scaled.m == 3
    assert grambsch_therneau_test(scaled, fit).global_df == 1


def test_too_few_events_for_two_covariates(rng):
    fit, scaled = _scaled(simulate_design(rng, 200, [0.5, -0.3]))
    rows = slice(0, 3)
    truncated = replace(
        scaled,
        event_times=scaled.event_times[rows],
        record_ids=scaled.record_ids[rows],
        residuals=scaled.residuals[rows],
        survival_before=scaled.survival_before[rows],
        scaled=scaled.scaled[rows],
    )
    with pytest.raises(ValueError, match="at least 4 events"):
        grambsch_therneau_test(truncated, fit)


def test_constant_event_times_are_degenerate(rng):
    design = simulate_design(rng, 200, [0.5])
    fit, scaled = _scaled(design)
    flat = replace(scaled, event_times=np.full(scaled.m, 5.0))
    with pytest.raises(DegenerateTimeError):
        grambsch_therneau_test(flat, fit, "identity")


def test_time_transforms(rng):
    design = simulate_design(rng, 200, [0.5])
    _, scaled = _scaled(design)
    times = np.asarray(scaled.event_times)
    np.testing.assert_allclose(transform_times(scaled, "log"), np.log(times))
    np.testing.assert_allclose(transform_times(scaled, "rank"), stats.rankdata(times))
    km = transform_times(scaled, "km")
    assert km[0] == 0.0
    assert np.all(np.diff(km) >= 0) and np.all(km < 1)
    with pytest.raises(ValueError, match="unknown time transform"):
        transform_times(scaled, "sqrt")


@pytest.mark.parametrize("g", ["identity", "log", "km", "rank"])
def test_report_shape_for_every_transform(rng, g):
    design = simulate_design(rng, 300, [0.5, -0.3])
    fit, scaled = _scaled(design)
    report = grambsch_therneau_test(scaled, fit, g)
    assert report.g_transform == g
    assert [test.name for test in report.per_covariate] == ["x0", "x1"]
    assert report.global_df == 2
    assert 0.0 <= report.global_p <= 1.0
    assert all(test.chi_square >= 0 for test in report.per_covariate)


def test_increasing_coefficient_gives_positive_theta():
    design = simulate_time_varying(np.random.default_rng(5), 2000, beta0=0.5, theta=0.05)
    fit, scaled = _scaled(design)
    report = grambsch_therneau_test(scaled, fit)
    assert report.per_covariate[0].theta > 0
    assert report.flagged(0.01) == ["x0"]


def test_flagged_rejects_bad_alpha(rng):
    fit, scaled = _scaled(simulate_design(rng, 200, [0.5]))
    report = grambsch_therneau_test(scaled, fit)
    with pytest.raises(ValueError):
        report.flagged(1.5)


@pytest.mark.slow
def test_rejection_rate_is_calibrated_under_proportional_hazards():
    rejections = 0
    for seed in range(500):
        design = simulate_time_varying(np.random.default_rng(seed), 300, beta0=0.5, theta=0.0)
        fit, scaled = _scaled(design)
        rejections += grambsch_therneau_test(scaled, fit).per_covariate[0].p_value < 0.05
    assert 0.02 <= rejections / 500 <= 0.09


@pytest.mark.slow
def test_power_against_linearly_increasing_coefficient():
    detected = 0
    for seed in range(200):
        design = simulate_time_varying(np.random.default_rng(seed), 1000, beta0=0.5, theta=0.05)
        fit, scaled = _scaled(design)
        detected += grambsch_therneau_test(scaled, fit).per_covariate[0].p_value < 0.01
    assert detected / 200 >= 0.9


def test_time_interaction_columns(rng):
    design = simulate_design(rng, 50, [0.5, -0.3])
    augmented = augment_with_time_interactions(design, [("x1", "weeksSinceLast")])
    assert augmented.names == ("x0", "x1", "x1:weeksSinceLast")
    np.testing.assert_allclose(augmented.column("x1:weeksSinceLast"), design.column("x1") * design.durations)
    assert augment_with_time_interactions(design, []) is design
    with pytest.raises(ValueError, match="unknown time scale"):
        augment_with_time_interactions(design, [("x0", "monthsSinceFirst")])
    with pytest.raises(ValueError, match="unknown covariate"):
        augment_with_time_interactions(design, [("x9", "weeksSinceLast")])
    with pytest.raises(ValueError, match="duplicate"):
        augment_with_time_interactions(augmented, [("x1", "weeksSinceLast")])


@pytest.mark.slow
def test_global_statistic_grows_with_a_time_varying_coefficient():
    def mean_global(theta):
        total = 0.0
        for seed in range(100):
            design = simulate_time_varying(np.random.default_rng(seed), 500, beta0=0.5, theta=theta)
            fit, scaled = _scaled(design)
            total += grambsch_therneau_test(scaled, fit).global_chi_square
        return total / 100

    assert mean_global(0.05) > mean_global(0.0)
