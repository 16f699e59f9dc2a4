import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochsim.series import (
    SingularityError,
    series_add,
    series_cos,
    series_eval,
    series_lift,
    series_mul,
    series_reciprocal,
    series_sin,
    series_sin_cos,
)


def test_mul_one_plus_t_times_one_minus_t():
    assert np.allclose(series_mul([1, 1], [1, -1], order=2), [1, 0, -1])


def test_sin_of_t_taylor():
    assert np.allclose(series_sin([0, 1, 0], order=3), [0, 1, 0, -1 / 6])


def test_trig_of_constant_series():
    c0 = 0.83
    s = series_sin([c0], order=2)
    c = series_cos([c0], order=2)
    assert np.allclose(s, [np.sin(c0), 0, 0])
    assert np.allclose(c, [np.cos(c0), 0, 0])


def test_cos_of_t():
    assert np.allclose(series_cos([0, 1], order=4), [1, 0, -0.5, 0, 1 / 24])


def test_reciprocal_geometric_series():
    # 1/(1+t) = 1 - t + t^2 - t^3 ...
    assert np.allclose(series_reciprocal([1, 1], order=3), [1, -1, 1, -1])


def test_reciprocal_times_original_is_one():
    a = np.array([2.0, -0.3, 0.7, 0.1])
    r = series_reciprocal(a)
    assert np.allclose(series_mul(a, r), [1, 0, 0, 0], atol=1e-14)


def test_reciprocal_zero_constant_term():
    with pytest.raises(SingularityError):
        series_reciprocal([0.0, 1.0])


def test_lift_dispatch_and_unknown_op():
    assert np.allclose(series_lift("add", [1, 2], [3, 4]), [4, 6])
    with pytest.raises(ValueError):
        series_lift("integrate", [1.0])


def test_eval_horner_matches_polyval():
    c = np.array([0.3, -1.2, 0.05, 2.0])
    t = 0.37
    assert series_eval(c, t) == pytest.approx(np.polyval(c[::-1], t))


def test_eval_on_stack():
    c = np.array([[1.0, 1.0, 0.5], [2.0, 0.0, -1.0]])
    out = series_eval(c, 0.1)
    assert out == pytest.approx([1.105, 1.99])


coeffs = st.lists(
    st.floats(min_value=-3, max_value=3, allow_nan=False), min_size=1, max_size=5
)


@given(coeffs, coeffs)
@settings(max_examples=100, deadline=None)
def test_mul_commutes(a, b):
    n = max(len(a), len(b)) - 1
    ab = series_mul(a, b, order=n)
    ba = series_mul(b, a, order=n)
    assert np.allclose(ab, ba, atol=1e-12)


@given(coeffs, coeffs, coeffs)
@settings(max_examples=100, deadline=None)
def test_mul_distributes_over_add(a, b, c):
    n = max(len(a), len(b), len(c)) - 1
    left = series_mul(a, series_add(b, c, order=n), order=n)
    right = series_add(series_mul(a, b, order=n), series_mul(a, c, order=n))
    assert np.allclose(left, right, atol=1e-10)


@given(coeffs)
@settings(max_examples=100, deadline=None)
def test_sin_cos_pythagoras(a):
    n = len(a) - 1
    s, c = series_sin_cos(a, order=n)
    one = series_add(series_mul(s, s, order=n), series_mul(c, c, order=n))
    expected = np.zeros(n + 1)
    expected[0] = 1.0
    assert np.allclose(one, expected, atol=1e-9)


@given(coeffs, st.floats(min_value=-0.01, max_value=0.01))
@settings(max_examples=100, deadline=None)
def test_truncated_product_evaluates_consistently(a, t):
    # the truncated square tracks the squared evaluation up to the dropped
    # tail, which is bounded by (sum|a_i|)^2 * t^(n+1) for |t| < 1
    n = len(a) - 1
    sq = series_mul(a, a, order=n)
    bound = (np.sum(np.abs(a)) ** 2 + 1.0) * abs(t) ** (n + 1) + 1e-12
    assert abs(series_eval(sq, t) - series_eval(np.array(a), t) ** 2) <= bound
