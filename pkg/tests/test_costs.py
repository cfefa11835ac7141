from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from poadual.costs import LINEAR, QUADRATIC, PiecewiseLinear, Polynomial, check_splittable_cost, constant, cost_from_dict
from poadual.errors import InvalidInstance

loads = st.fractions(min_value=0, max_value=10, max_denominator=16)


def test_polynomial_values_and_derivative():
    p = Polynomial([1, 0, 3])
    assert p(F(1, 2)) == F(7, 4)
    assert p.derivative(F(1, 2)) == 3
    assert LINEAR.derivative(5) == 1
    assert constant(2).is_constant() and not LINEAR.is_constant()


def test_negative_coefficient_rejected():
    with pytest.raises(InvalidInstance):
        Polynomial([0, -1])


def test_piecewise_interpolates():
    c = PiecewiseLinear([[0, 0], [1, 2], [3, 2]])
    assert c(F(1, 2)) == 1 and c(2) == 2
    assert not c.has_derivative


def test_piecewise_must_not_decrease():
    with pytest.raises(InvalidInstance):
        PiecewiseLinear([[0, 2], [1, 1]])


def test_piecewise_outside_range():
    with pytest.raises(InvalidInstance):
        PiecewiseLinear([[0, 0], [1, 1]])(2)


def test_dict_round_trip():
    for c in (LINEAR, QUADRATIC, constant(3), PiecewiseLinear([[0, 1], [2, 5]])):
        assert cost_from_dict(c.to_dict()) == c


def test_unknown_kind():
    with pytest.raises(InvalidInstance):
        cost_from_dict({"kind": "exponential"})


def test_splittable_check_needs_derivative():
    with pytest.raises(InvalidInstance):
        check_splittable_cost(PiecewiseLinear([[0, 0], [1, 1]]), [F(0), F(1)])
    check_splittable_cost(QUADRATIC, [F(k, 2) for k in range(5)])


@given(st.lists(st.integers(0, 5), min_size=1, max_size=4), loads, loads)
def test_polynomials_are_monotone(coeffs, a, b):
    p = Polynomial(coeffs)
    lo, hi = min(a, b), max(a, b)
    assert p(lo) <= p(hi)
    assert p(0) >= 0
