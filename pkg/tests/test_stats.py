import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from datesso.stats import (
    DegenerateComparison,
    SmallSampleWarning,
    effect_label,
    eta_squared,
    kruskal_wallis,
    sustainability_score,
)

from oracles import kruskal_h_by_hand

ANCHOR_RUNS = {
    "datesso": (417.10, 113),
    "rbc": (-3146.66, 187),
    "doa": (-910.61, 102),
    "tlhca": (-1478.67, 133),
}


def test_sustainability_anchors():
    got = sustainability_score(ANCHOR_RUNS)
    expected = {"datesso": 0.0177, "rbc": 0.0053, "doa": 0.0160, "tlhca": 0.0110}
    for name, value in expected.items():
        assert got[name] == pytest.approx(value, abs=5e-4)


def test_sustainability_extremes_are_exact():
    got = sustainability_score(ANCHOR_RUNS)
    assert got["datesso"] == pytest.approx(2 / 113, abs=1e-15)
    assert got["rbc"] == pytest.approx(1 / 187, abs=1e-15)


def test_sustainability_without_violations():
    got = sustainability_score({"a": (5.0, 0), "b": (1.0, 4)})
    assert got["a"] is None
    assert got["b"] == pytest.approx(0.25)


def test_sustainability_errors():
    with pytest.raises(DegenerateComparison, match="degenerate"):
        sustainability_score({"a": (3.0, 1), "b": (3.0, 2)})
    with pytest.raises(ValueError):
        sustainability_score({"a": (3.0, 1)})
    with pytest.raises(ValueError):
        sustainability_score({"a": (3.0, -1), "b": (1.0, 1)})


@given(st.dictionaries(st.text(min_size=1, max_size=3), st.tuples(st.floats(-1e4, 1e4), st.integers(1, 500)),
                       min_size=2, max_size=6))
def test_sustainability_range(inputs):
    totals = {s for s, _ in inputs.values()}
    if len(totals) < 2:
        return
    for name, score in sustainability_score(inputs).items():
        v = inputs[name][1]
        assert 1 / v - 1e-12 <= score <= 2 / v + 1e-12


def test_kruskal_hand_example():
    with pytest.warns(SmallSampleWarning):
        h, p = kruskal_wallis([1, 2, 3], [101, 102, 103])
    assert h == pytest.approx(3.857, abs=1e-3)
    assert h == pytest.approx(kruskal_h_by_hand([1, 2, 3], [101, 102, 103]), abs=1e-12)
    assert p < 0.05


def test_kruskal_identical_samples():
    h, p = kruskal_wallis([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    assert h == 0.0
    assert p == 1.0
    assert kruskal_wallis([7.0] * 6, [7.0] * 6) == (0.0, 1.0)


def test_kruskal_no_warning_at_min_size():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        kruskal_wallis(np.arange(5), np.arange(5) + 2.5)


def test_kruskal_errors():
    with pytest.raises(ValueError):
        kruskal_wallis([1, 2, 3])
    with pytest.raises(ValueError):
        kruskal_wallis([1], [2, 3, 4, 5, 6])


def test_kruskal_matches_scipy(rng):
    from scipy.stats import kruskal

    a = rng.integers(0, 6, 12)
    b = rng.integers(2, 9, 15)
    c = rng.normal(4, 2, 9).round(1)
    h, p = kruskal_wallis(a, b, c)
    ref = kruskal(a, b, c)
    assert h == pytest.approx(ref.statistic, rel=1e-12)
    assert p == pytest.approx(ref.pvalue, rel=1e-9)


samples = st.lists(st.integers(0, 20), min_size=5, max_size=15)


@given(samples, samples, st.randoms(use_true_random=False))
def test_kruskal_permutation_invariant(a, b, rnd):
    h = kruskal_wallis(a, b)[0]
    a2, b2 = list(a), list(b)
    rnd.shuffle(a2)
    rnd.shuffle(b2)
    assert kruskal_wallis(a2, b2)[0] == pytest.approx(h, abs=1e-9)
    assert kruskal_wallis(b, a)[0] == pytest.approx(h, abs=1e-9)
    assert h == pytest.approx(kruskal_h_by_hand(a, b), abs=1e-9)


def test_eta_squared():
    h = kruskal_h_by_hand([1, 2, 3], [101, 102, 103])
    e = eta_squared(h, 6, 2)
    assert e == pytest.approx(0.714, abs=1e-3)
    assert effect_label(e) == "large"
    assert eta_squared(1.0, 10, 2) == 0.0
    assert eta_squared(0.2, 10, 2) == 0.0
    with pytest.raises(ValueError):
        eta_squared(1.0, 2, 2)


@pytest.mark.parametrize("value, label", [(0.0, "negligible"), (0.01, "small"), (0.06, "medium"), (0.14, "large")])
def test_effect_thresholds(value, label):
    assert effect_label(value) == label
