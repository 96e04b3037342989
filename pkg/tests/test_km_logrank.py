from pathlib import Path

import numpy as np
import pytest
from scipy import special, stats

from dataset_io import load_panel
from km_logrank import kaplan_meier, kaplan_meier_by_group, logrank_test, survival_quantile
from survival_core import EventKind, build_risk_index, build_risk_index_from_arrays

EXAMPLE_PANEL = Path(__file__).resolve().parent.parent / "sample_data" / "example_panel.tsv"


def _index(prefix, durations, events):
    return build_risk_index_from_arrays(
        [f"{prefix}{i}" for i in range(len(durations))], durations, events
    )


def test_kaplan_meier_exact_steps():
    """Events at 1 and 2 with a censoring at 3 give survival 2/3 then 1/3."""

    curve = kaplan_meier(_index("r", [1, 2, 3], [True, True, False]))
    np.testing.assert_array_equal(curve.times, [1.0, 2.0])
    assert curve.survival[0] == pytest.approx(2 / 3, abs=1e-15)
    assert curve.survival[1] == pytest.approx(1 / 3, abs=1e-15)
    assert curve.quartiles == (1.0, 2.0, None)
    assert curve.survival_at(1.5) == pytest.approx(2 / 3)
    assert curve.survival_before(2.0) == pytest.approx(2 / 3)
    assert curve.survival_before(1.0) == 1.0


def test_kaplan_meier_without_censoring_is_the_empirical_survivor_function(rng):
    durations = rng.integers(1, 40, size=250).astype(float)
    curve = kaplan_meier(_index("r", durations, np.ones(250, dtype=bool)))
    empirical = np.array([np.mean(durations > t) for t in curve.times])
    np.testing.assert_allclose(curve.survival, empirical, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(curve.times, np.unique(durations))


def test_kaplan_meier_without_events_is_degenerate():
    curve = kaplan_meier(_index("r", [1, 2], [False, False]))
    assert curve.degenerate
    assert curve.steps == ()
    assert curve.quartiles is None


def test_kaplan_meier_is_monotone_and_bounded(rng):
    durations = rng.integers(1, 30, size=200).astype(float)
    events = rng.random(200) < 0.7
    survival = kaplan_meier(_index("r", durations, events)).survival
    assert np.all(np.diff(survival) <= 0)
    assert np.all((survival >= 0) & (survival <= 1))


def test_kaplan_meier_reaches_zero_when_last_record_fails():
    curve = kaplan_meier(_index("r", [1, 2, 2, 4], [True, True, True, True]))
    assert curve.survival[-1] == 0.0
    assert curve.steps[1].n_events == 2


def test_survival_quantile_rejects_bad_probability():
    curve = kaplan_meier(_index("r", [1, 2], [True, True]))
    with pytest.raises(ValueError):
        survival_quantile(curve, 1.0)


def test_kaplan_meier_by_group_keeps_labels():
    curves = kaplan_meier_by_group(
        {"VE": _index("a", [1, 2], [True, False]), "MA": _index("b", [3], [True])}
    )
    assert list(curves) == ["VE", "MA"]


def test_logrank_hand_computed_two_groups():
    """A fails at 1 and 2, B at 3 and 4: O-E = 7/6, V = 17/36."""

    result = logrank_test([_index("a", [1, 2], [True, True]), _index("b", [3, 4], [True, True])])
    assert result.df == 1
    assert result.observed == (2, 2)
    np.testing.assert_allclose(result.expected, [5 / 6, 19 / 6])
    assert result.chi_square == pytest.approx(49 / 17, rel=1e-12)
    assert result.p_value == pytest.approx(special.gammaincc(0.5, 49 / 34), rel=1e-12)


def test_logrank_of_mirrored_groups_is_zero(rng):
    durations = rng.integers(1, 20, size=50).astype(float)
    events = rng.random(50) < 0.7
    result = logrank_test([_index("a", durations, events), _index("b", durations, events)])
    assert result.chi_square == pytest.approx(0.0, abs=1e-10)
    assert result.p_value == pytest.approx(1.0)


def test_logrank_three_groups_has_two_degrees_of_freedom(rng):
    groups = [
        _index(label, rng.integers(1, 20, size=30).astype(float), rng.random(30) < 0.8)
        for label in "abc"
    ]
    result = logrank_test(groups)
    assert result.df == 2
    assert 0.0 <= result.p_value <= 1.0
    assert sum(result.observed) == pytest.approx(sum(result.expected))


def test_logrank_accepts_groups_built_separately_with_shared_keys():
    """Per-kind indices of the example panel reuse keys such as Acme#2 across groups."""

    records = load_panel(EXAMPLE_PANEL).records
    ve = build_risk_index([r for r in records if r.event_kind is EventKind.VENTURE_EQUITY])
    censored = build_risk_index([r for r in records if r.event_kind is EventKind.NO_EVENT])
    assert set(ve.record_ids) & set(censored.record_ids)

    result = logrank_test([ve, censored])
    assert result.df == 1
    assert result.observed == (7, 0)
    assert sum(result.expected) == pytest.approx(7.0)
    assert 0.0 <= result.p_value <= 1.0


def test_logrank_same_labels_with_different_data_are_distinct_groups():
    result = logrank_test([_index("a", [1, 2], [True, True]), _index("a", [3, 4], [True, False])])
    assert result.df == 1


def test_logrank_input_errors():
    a = _index("a", [1, 2], [True, True])
    with pytest.raises(ValueError, match="at least two groups"):
        logrank_test([a])
    with pytest.raises(ValueError, match="disjoint"):
        logrank_test([a, a])
    with pytest.raises(ValueError, match="repeats group 0"):
        logrank_test([a, _index("a", [1, 2], [True, True])])
    with pytest.raises(ValueError, match="at least one event"):
        logrank_test([_index("a", [1], [False]), _index("b", [2], [False])])


@pytest.mark.slow
def test_logrank_p_values_are_uniform_under_permutation():
    p_values = []
    for seed in range(500):
        rng = np.random.default_rng(seed)
        durations = 1.0 + rng.exponential(10.0, size=80)
        events = rng.random(80) < 0.8
        labels = rng.permutation(np.repeat([0, 1], 40))
        groups = [
            _index(f"g{g}-", durations[labels == g], events[labels == g]) for g in (0, 1)
        ]
        p_values.append(logrank_test(groups).p_value)
    assert stats.kstest(p_values, "uniform").statistic < 0.1
