import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespec.analysis import (
    credible_interval,
    endpoint_error,
    format_selection,
    model_select,
    summarize,
    weighted_quantile,
)
from bayespec.synthetic import gm_spec


def cdf_walk(xs, ws, q):
    """Walk the sorted sample; sample k sits at (weight strictly before it) / (weight before the last)."""
    pairs = sorted(zip(xs, ws))
    pairs = [p for p in pairs if p[1] > 0]
    total_before_last = sum(w for _, w in pairs[:-1])
    acc = 0.0
    prev_x, prev_pos = pairs[0][0], 0.0
    for x, w in pairs:
        pos = acc / total_before_last
        if pos >= q:
            if pos == prev_pos:
                return x
            return prev_x + (x - prev_x) * (q - prev_pos) / (pos - prev_pos)
        prev_x, prev_pos = x, pos
        acc += w
    return pairs[-1][0]


def test_median_of_1_to_100():
    assert weighted_quantile(np.arange(1, 101), None, 0.5) == 50.5


def test_endpoints():
    x = np.array([3.0, -1.0, 7.0, 2.0])
    w = np.array([1.0, 2.0, 0.5, 1.0])
    assert weighted_quantile(x, w, 0.0) == -1.0
    assert weighted_quantile(x, w, 1.0) == 7.0


def test_skewed_weights_against_walk():
    x, w = [1.0, 2.0, 3.0, 4.0], [0.7, 0.1, 0.1, 0.1]
    got = weighted_quantile(x, w, 0.5)
    assert got == pytest.approx(cdf_walk(x, w, 0.5), rel=1e-14)
    assert 1.0 < got < 2.0


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(0.01, 10)), min_size=2, max_size=30),
       st.floats(0, 1))
def test_matches_walk(pairs, q):
    xs, ws = zip(*pairs)
    if len(set(xs)) < len(xs):
        return  # ties make the order among equal values arbitrary
    assert weighted_quantile(xs, ws, q) == pytest.approx(cdf_walk(xs, ws, q), rel=1e-9, abs=1e-9)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.floats(0, 1))
def test_uniform_weights_is_linear_quantile(xs, q):
    assert weighted_quantile(xs, None, q) == pytest.approx(np.quantile(xs, q), rel=1e-9, abs=1e-9)


@settings(max_examples=50)
@given(st.lists(st.floats(0.1, 5), min_size=3, max_size=20), st.floats(0.1, 100),
       st.randoms(use_true_random=False))
def test_rescale_permute_monotone(ws, c, rnd):
    xs = np.arange(len(ws), dtype=float) ** 1.5
    ws = np.array(ws)
    qs = np.linspace(0, 1, 11)
    base = [weighted_quantile(xs, ws, q) for q in qs]
    assert np.all(np.diff(base) >= 0)
    assert np.allclose(base, [weighted_quantile(xs, c * ws, q) for q in qs], rtol=1e-12)
    perm = list(range(len(xs)))
    rnd.shuffle(perm)
    assert np.allclose(base, [weighted_quantile(xs[perm], ws[perm], q) for q in qs], rtol=1e-12)


def test_quantile_errors():
    with pytest.raises(ValueError):
        weighted_quantile([], None, 0.5)
    with pytest.raises(ValueError):
        weighted_quantile([1, 2], [1, -1], 0.5)
    with pytest.raises(ValueError):
        weighted_quantile([1, 2], [1, 1], 1.5)
    with pytest.raises(ValueError):
        weighted_quantile([1, 2], [0, 0], 0.5)


def test_normal_interval():
    z = np.random.default_rng(0).standard_normal(1_000_000)
    lo, hi = credible_interval(z, level=0.95)
    assert abs(lo + 1.959964) < 0.01 and abs(hi - 1.959964) < 0.01


def test_interval_full_level_is_range():
    x = np.random.default_rng(1).random(50)
    assert credible_interval(x, level=1.0) == (x.min(), x.max())


def test_endpoint_error():
    assert endpoint_error((1.0, 3.0), (1.5, 2.0)) == 1.5
    assert endpoint_error((1.0, 3.0), (1.0, 3.0)) == 0.0


def test_model_select_example():
    k, rows = model_select([(6, 3256.0), (7, 3232.0), (8, 3232.5)])
    assert k == 7
    assert [r.k for r in rows] == [6, 7, 8]


def test_model_select_single_ties_and_order():
    assert model_select([(4, 1.0)])[0] == 4
    assert model_select([(5, 2.0), (3, 2.0), (4, 2.5)])[0] == 3
    a = [(1, 3.0), (2, 1.0), (3, 2.0)]
    assert model_select(a)[0] == model_select(a[::-1])[0] == 2


def test_model_select_excludes_nan():
    k, rows = model_select([(2, [1.0, math.nan, 1.2]), (3, math.nan), (4, 5.0)])
    assert k == 2
    r2, r3 = rows[0], rows[1]
    assert r2.trials == 2 and r2.free_energy == pytest.approx(1.1)
    assert r2.std == pytest.approx(np.std([1.0, 1.2], ddof=1))
    assert "1 non-finite" in r2.note
    assert r3.trials == 0 and "warning" in r3.note
    assert "selected" in format_selection(rows, k)
    with pytest.raises(ValueError):
        model_select([(1, math.nan)])


def test_summarize_sorts_peaks():
    spec = gm_spec(2)
    s = np.array([[1.0, 2.0, 10.0, 3.0, 1.0, 20.0], [1.0, 1.0, 10.0, 3.0, 2.0, 20.0]])
    rows = summarize(spec, s)
    by = {r["name"]: r for r in rows}
    # the peak at the smaller position is always listed first
    assert [r["mean"] for r in rows][1] == 1.0
    assert len(rows) == 6 and "ci95" in by[spec.names[0]]
