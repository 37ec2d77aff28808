import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nvbehavior.signal_core import (
    derivative, find_extrema, mad, moving_average, stillness_mask, stillness_threshold,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def brute_prominence(x, i):
    """Topographic prominence of the maximum at i, straight from the definition."""
    left = i
    while left > 0 and x[left - 1] <= x[i]:
        left -= 1
    right = i
    while right < len(x) - 1 and x[right + 1] <= x[i]:
        right += 1
    return x[i] - max(min(x[left:i + 1]), min(x[i:right + 1]))


def brute_extrema(x, min_prom):
    """Strict interior local extrema, prominence-filtered, then collapsed to alternate."""
    found = []
    for i in range(1, len(x) - 1):
        if x[i] > x[i - 1] and x[i] > x[i + 1] and brute_prominence(x, i) >= min_prom:
            found.append((i, 1))
        neg = [-v for v in x]
        if neg[i] > neg[i - 1] and neg[i] > neg[i + 1] and brute_prominence(neg, i) >= min_prom:
            found.append((i, -1))
    out = []
    for i, k in found:
        if out and out[-1][1] == k:
            if k * x[i] > k * x[out[-1][0]]:
                out[-1] = (i, k)
        else:
            out.append((i, k))
    return out


# -- moving average -----------------------------------------------------------

def test_moving_average_constant():
    t = np.cumsum(np.random.default_rng(0).uniform(0.01, 0.1, 50))
    assert np.array_equal(moving_average(np.full(50, 3.7), t, 0.25), np.full(50, 3.7))


def test_moving_average_truncated_window():
    out = moving_average([0, 0, 3, 0, 0], np.arange(5.0), 3.0)
    assert np.allclose(out, [0, 1, 1, 1, 0])


def test_moving_average_alternating():
    x = np.array([1, -1, 1, -1, 1, -1, 1.0])
    out = moving_average(x, np.arange(7.0), 3.0)
    assert np.allclose(out[1:-1], [1 / 3, -1 / 3, 1 / 3, -1 / 3, 1 / 3])


def test_moving_average_errors():
    with pytest.raises(ValueError):
        moving_average([], [], 1.0)
    with pytest.raises(ValueError):
        moving_average([1.0], [0.0], 0.0)


@given(arrays(float, 20, elements=finite), arrays(float, 20, elements=finite),
       st.floats(-5, 5), st.floats(-5, 5))
def test_moving_average_linear(x, y, a, b):
    t = np.arange(20) / 30.0
    lhs = moving_average(a * x + b * y, t, 0.25)
    rhs = a * moving_average(x, t, 0.25) + b * moving_average(y, t, 0.25)
    assert np.allclose(lhs, rhs, atol=1e-6 * (1 + np.abs(x).max() + np.abs(y).max()) * 10)


# -- derivative ---------------------------------------------------------------

def test_derivative_examples():
    t = np.cumsum(np.random.default_rng(1).uniform(0.02, 0.05, 30))
    assert np.allclose(derivative(2 * t, t), 2.0)
    assert np.array_equal(derivative(np.full(30, 4.0), t), np.zeros(30))
    assert derivative([0, 1, 0], [0, 1, 2]).tolist() == [1, 0, -1]
    with pytest.raises(ValueError):
        derivative([1.0], [0.0])


@given(arrays(float, 15, elements=finite), arrays(float, 15, elements=finite), st.floats(-5, 5))
def test_derivative_linear(x, y, a):
    t = np.arange(15) / 30.0
    assert np.allclose(derivative(a * x + y, t), a * derivative(x, t) + derivative(y, t),
                       atol=1e-6 * 30 * (1 + np.abs(x).max() + np.abs(y).max()) * 10)


@given(st.floats(-100, 100), st.integers(2, 40))
def test_derivative_of_smoothed_constant_is_zero(c, n):
    t = np.arange(n) / 30.0
    assert np.all(derivative(moving_average(np.full(n, c), t, 0.25), t) == 0)


# -- MAD and stillness ----------------------------------------------------------

def test_mad_examples():
    assert mad([1, 1, 1]) == 0
    assert mad([1, 2, 3, 4, 5]) == 1
    assert mad([0, 0, 0, 100]) == 0
    with pytest.raises(ValueError):
        mad([])


def test_stillness_examples():
    assert stillness_mask(np.zeros(10), 3.0).all()
    v = np.array([0, 0, 0, 0, 10, 0, 0, 0, 0.0])
    # MAD 0 -> 3 * 0.1 * sd(ddof=1); sd = 10/3 so the threshold is 1.0
    assert stillness_threshold(v, 3.0) == pytest.approx(1.0)
    assert stillness_mask(v, 3.0).tolist() == [True] * 4 + [False] + [True] * 4


def test_stillness_sine_rule():
    t = np.linspace(0, 4 * np.pi, 400)
    v = np.sin(t)
    mask = stillness_mask(v, 3.0)
    thr = 3.0 * np.median(np.abs(v - np.median(v)))
    assert mask.tolist() == (np.abs(v) <= thr).tolist()
    zero_crossing = np.argmin(np.abs(v[50:150])) + 50
    assert mask[zero_crossing]
    # a tighter multiplier leaves the sine peaks moving
    tight = stillness_mask(v, 1.0)
    assert tight[zero_crossing] and not tight[np.argmax(v)]


@given(arrays(float, st.integers(1, 40), elements=finite), st.floats(0.1, 10))
def test_stillness_sign_invariant(v, k):
    assert np.array_equal(stillness_mask(v, k), stillness_mask(-v, k))


# -- extrema -------------------------------------------------------------------

def test_extrema_examples():
    assert len(find_extrema(np.arange(10.0), 0.0)) == 0
    e = find_extrema([0, 5, 0, 1, 0, 5, 0], 2.0)
    assert e.maxima.tolist() == [1, 5]
    e = find_extrema([0, -5, 0], 2.0)
    assert e.minima.tolist() == [1] and e.prominences.tolist() == [5.0]


@given(arrays(float, st.integers(3, 40), elements=st.floats(-10, 10, allow_nan=False),
              unique=True), st.floats(0, 5))
def test_extrema_match_bruteforce(x, min_prom):
    e = find_extrema(x, min_prom)
    assert list(zip(e.indices.tolist(), e.kinds.tolist())) == brute_extrema(list(x), min_prom)
    for i, k, p in zip(e.indices, e.kinds, e.prominences):
        assert p == pytest.approx(brute_prominence(list(k * x), i))


@given(arrays(float, st.integers(3, 40), elements=st.floats(-10, 10, allow_nan=False), unique=True),
       st.floats(0, 3))
def test_extrema_alternate(x, min_prom):
    e = find_extrema(x, min_prom)
    assert np.all(np.diff(e.indices) > 0)
    assert np.all(e.kinds[1:] != e.kinds[:-1])


@given(arrays(float, st.integers(3, 30), elements=st.integers(-1000, 1000).map(float), unique=True),
       st.integers(-1000, 1000), st.sampled_from([0.5, 2.0, 4.0]))
def test_extrema_shift_and_scale(x, c, s):
    base = find_extrema(x, 0.0)
    shifted = find_extrema(x + c, 0.0)
    scaled = find_extrema(x * s, 0.0)
    assert np.array_equal(base.indices, shifted.indices)
    assert np.array_equal(base.prominences, shifted.prominences)
    assert np.array_equal(base.indices, scaled.indices)
    assert np.allclose(scaled.prominences, s * base.prominences)
