import numpy as np
import pytest

from competing_risks import (
    DEFAULT_CAUSES,
    CauseSpec,
    FailedFit,
    InsufficientEvents,
    check_disjoint,
    fit_competing,
    recensor_by_cause,
)
from cox_fit import CoxFit, fit_cox
from dataset_io import build_design
from survival_core import EventKind
from synthgen import generate
from tests.conftest import single_ipo_panel, three_cause_scenario

ALL_EVENTS = CauseSpec("any", frozenset({EventKind.VENTURE_EQUITY, EventKind.MERGER_ACQUISITION, EventKind.IPO}))


@pytest.fixture(scope="module")
def panel():
    scenario = three_cause_scenario()
    records, _ = generate(scenario)
    return scenario.recipe(), records


def test_cause_spec_parsing():
    cause = CauseSpec.parse("exit=MA,IPO")
    assert cause.name == "exit"
    assert cause.included_kinds == {EventKind.MERGER_ACQUISITION, EventKind.IPO}
    assert cause.label == "exit=IPO,MA"
    with pytest.raises(ValueError):
        CauseSpec.parse("exit")
    with pytest.raises(ValueError, match="NONE"):
        CauseSpec.parse("nothing=NONE")
    with pytest.raises(ValueError, match="unknown event kind"):
        CauseSpec.parse("seed=SEED")


def test_causes_must_be_disjoint():
    check_disjoint(DEFAULT_CAUSES)
    with pytest.raises(ValueError, match="share"):
        check_disjoint([CauseSpec.parse("a=VE,MA"), CauseSpec.parse("b=MA")])
    with pytest.raises(ValueError, match="repeated"):
        check_disjoint([CauseSpec.parse("a=VE"), CauseSpec.parse("a=MA")])
    with pytest.raises(ValueError):
        check_disjoint([])


def test_recensoring_keeps_durations_and_kinds(panel):
    _, records = panel
    financing = DEFAULT_CAUSES[0]
    recensored = recensor_by_cause(records, financing)
    for before, after in zip(records, recensored):
        assert after.duration_weeks == before.duration_weeks
        assert after.event_kind is before.event_kind
        assert after.event_occurred == (before.event_kind is EventKind.VENTURE_EQUITY)
        assert after.recensored == (before.event_occurred and before.event_kind is not EventKind.VENTURE_EQUITY)


def test_single_all_events_cause_reproduces_the_plain_fit(panel):
    recipe, records = panel
    report = fit_competing(records, recipe, [ALL_EVENTS])
    plain = fit_cox(build_design(records, recipe))
    fitted = report.result("any").fit
    np.testing.assert_allclose(fitted.beta, plain.beta, atol=1e-10)
    np.testing.assert_allclose(fitted.se, plain.se, atol=1e-10)


def test_event_partition_sums_to_n(panel):
    recipe, records = panel
    report = fit_competing(records, recipe)
    partition = report.event_partition()
    assert sum(partition.values()) == report.n == len(records)
    assert partition["outside_causes"] == 0
    assert partition["financing"] == sum(r.event_kind is EventKind.VENTURE_EQUITY for r in records)


def test_uncovered_kinds_are_counted_separately(panel):
    recipe, records = panel
    report = fit_competing(records, recipe, [CauseSpec.parse("financing=VE")])
    partition = report.event_partition()
    assert partition["outside_causes"] == sum(
        r.event_kind in (EventKind.MERGER_ACQUISITION, EventKind.IPO) for r in records
    )
    assert sum(partition.values()) == len(records)


def test_ipo_can_be_fitted_on_its_own(panel):
    recipe, records = panel
    causes = [CauseSpec.parse(text) for text in ("financing=VE", "acquisition=MA", "ipo=IPO")]
    report = fit_competing(records, recipe, causes)
    assert [result.cause.name for result in report.per_cause] == ["financing", "acquisition", "ipo"]
    assert all(result.fitted for result in report.per_cause)
    assert report.covariate_names == ("trafficDelta", "hasTrendsData")


def test_cause_without_events_is_marked_not_fitted(panel):
    recipe, records = panel
    only_ve = [r for r in records if r.event_kind in (EventKind.VENTURE_EQUITY, EventKind.NO_EVENT)]
    report = fit_competing(only_ve, recipe)
    exit_result = report.result("exit")
    assert not exit_result.fitted
    assert isinstance(exit_result.fit, InsufficientEvents)
    assert exit_result.n_events == 0
    assert report.result("financing").fitted


def test_parallel_fits_match_sequential(panel):
    recipe, records = panel
    sequential = fit_competing(records, recipe, workers=1)
    parallel = fit_competing(records, recipe, workers=2)
    for first, second in zip(sequential.per_cause, parallel.per_cause):
        np.testing.assert_array_equal(first.fit.beta, second.fit.beta)


def test_competing_input_errors(panel):
    recipe, records = panel
    with pytest.raises(ValueError):
        fit_competing([], recipe)
    with pytest.raises(ValueError, match="workers"):
        fit_competing(records, recipe, workers=0)
    with pytest.raises(KeyError):
        fit_competing(records, recipe).result("missing")


def test_cause_that_cannot_be_fitted_keeps_the_other_fits(panel):
    recipe, records = panel
    sparse = single_ipo_panel(records)
    causes = [CauseSpec.parse("financing=VE"), CauseSpec.parse("ipo=IPO")]
    report = fit_competing(sparse, recipe, causes)

    financing = report.result("financing")
    assert isinstance(financing.fit, CoxFit)
    np.testing.assert_allclose(
        financing.fit.beta, fit_competing(sparse, recipe, causes[:1]).result("financing").fit.beta
    )

    ipo = report.result("ipo")
    assert ipo.n_events == 1
    assert not ipo.fitted
    assert isinstance(ipo.fit, FailedFit)
    assert ipo.fit.error_type in {"SeparationError", "ConvergenceError", "CollinearityError"}
    assert ipo.fit.message
    assert [result.cause.name for result in report.failures] == ["ipo"]
    assert sum(report.event_partition().values()) == len(sparse)


def test_two_cause_estimates_recover_the_generating_coefficients():
    scenario = three_cause_scenario(n_subjects=4000, seed=11)
    records, truth = generate(scenario)
    causes = [CauseSpec.parse("financing=VE"), CauseSpec.parse("acquisition=MA")]
    report = fit_competing(records, scenario.recipe(), causes)
    true_beta = truth.to_document()["true_beta"]
    for name, code in (("financing", "VE"), ("acquisition", "MA")):
        fit = report.result(name).fit
        expected = np.array([true_beta[code][column] for column in fit.names])
        assert np.all(np.abs(fit.beta - expected) <= 3.0 * fit.se), (name, fit.beta, expected)
