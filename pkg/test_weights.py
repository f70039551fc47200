import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from Models.copson_weights import WeightExpr, WeightTerm, constant, exponential, indicator, power
from Weights.weights import (
    conjugate, cumulative_weight, dominant_term, dual_integral, eval_weight, integrability, integrate_weight,
    sigma_tail, xdiv, xmul, xpow,
)
from utils import InvalidInputError


def test_extended_real_conventions():
    """0·inf = 0, 0/0 = 0, a^0 = 1"""
    assert xmul(0.0, math.inf) == 0.0
    assert xdiv(0.0, 0.0) == 0.0
    assert xdiv(1.0, 0.0) == math.inf
    assert xpow(math.inf, 0.0) == 1.0
    assert xpow(0.0, -1.0) == math.inf
    assert xpow(math.inf, -0.5) == 0.0


def test_conjugate_exponent():
    assert conjugate(2) == 2
    assert conjugate(1) == math.inf
    assert conjugate(0.5) == -1


def test_eval_weight_support_is_half_open():
    """Le support (a, b] exclut a et inclut b"""
    w = indicator(1.0, 2.0, height=3.0)
    assert eval_weight(w, 1.0) == 0.0
    assert eval_weight(w, 2.0) == 3.0
    np.testing.assert_allclose(eval_weight(w, np.array([0.5, 1.5, 2.5])), [0.0, 3.0, 0.0])


def test_eval_weight_rejects_nonpositive_t():
    with pytest.raises(InvalidInputError):
        eval_weight(constant(1.0), 0.0)


def test_closed_form_integrals():
    assert integrate_weight(power(2.0), 0.0, 1.0) == pytest.approx(1 / 3, rel=1e-12)
    assert integrate_weight(exponential(-1.0), 0.0, math.inf) == pytest.approx(1.0, rel=1e-12)
    assert cumulative_weight(constant(2.0), 3.0) == pytest.approx(6.0, rel=1e-12)


def test_power_log_integral():
    """Intégrale de |ln t| sur (0, 1) = 1"""
    w = WeightExpr((WeightTerm(coef=1.0, log_power=1.0, support=(0.0, 1.0)),))
    assert integrate_weight(w, 0.0, 1.0) == pytest.approx(1.0, rel=1e-10)


def test_divergent_integrals_are_infinite():
    assert integrate_weight(constant(1.0), 0.0, math.inf) == math.inf
    assert integrate_weight(power(-1.0), 0.0, 1.0) == math.inf
    assert integrability(power(-1.0), 0.0, 1.0) == ('infinite', 'zero')
    assert integrability(power(-2.0), 1.0, math.inf) == ('finite', None)


def test_empty_interval_integrates_to_zero():
    assert integrate_weight(constant(1.0), 2.0, 2.0) == 0.0
    assert dual_integral(exponential(1.0), 2, 3.0, 3.0) == 0.0


def test_dual_integral_exponential():
    """v = e^{2t}, p = 2: intégrale de e^{-2t} sur (0, inf) = 1/2"""
    assert dual_integral(exponential(2.0), 2, 0.0, math.inf) == pytest.approx(0.5, rel=1e-10)
    assert sigma_tail(exponential(1.0), 2, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-10)


def test_dual_integral_infinite_where_v_vanishes():
    v = indicator(0.0, 1.0)
    assert dual_integral(v, 2, 0.5, 2.0) == math.inf
    assert dual_integral(v, 2, 0.25, 0.75) == pytest.approx(0.5, rel=1e-12)


def test_dual_integral_of_sum_of_terms():
    """v = 1 + 1 sur (0, 1): v^{-1} = 1/2"""
    v = WeightExpr((WeightTerm(coef=1.0, support=(0.0, 1.0)), WeightTerm(coef=1.0, power=0.0, support=(0.0, 1.0))))
    assert dual_integral(v, 2, 0.0, 1.0) == pytest.approx(0.5, rel=1e-8)


def test_dominant_term():
    terms = power(-0.5).terms + power(2.0).terms + exponential(1.0).terms
    assert dominant_term(terms, 0).power == -0.5
    assert dominant_term(terms, math.inf).exp_rate == 1.0
    with pytest.raises(InvalidInputError):
        dominant_term(terms, 2.0)


def test_invalid_support_rejected():
    with pytest.raises(InvalidInputError):
        WeightTerm(coef=1.0, support=(2.0, 1.0))
    with pytest.raises(InvalidInputError):
        WeightTerm(coef=-1.0)


@settings(max_examples=25, deadline=None)
@given(
    exponent=st.floats(min_value=-0.9, max_value=3.0),
    scale=st.floats(min_value=0.1, max_value=10.0),
    b=st.floats(min_value=0.1, max_value=50.0),
)
def test_integral_is_linear_in_the_weight(exponent, scale, b):
    base = integrate_weight(power(exponent), 0.0, b)
    assert integrate_weight(power(exponent).scaled(scale), 0.0, b) == pytest.approx(scale * base, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(
    t=st.floats(min_value=1e-3, max_value=20.0),
    s=st.floats(min_value=1e-3, max_value=20.0),
)
def test_sigma_tail_is_nonincreasing(t, s):
    v = WeightExpr((WeightTerm(coef=1.0, power=0.5, exp_rate=1.0),))
    lo, hi = sorted((t, s))
    assert sigma_tail(v, 2, hi) <= sigma_tail(v, 2, lo) * (1 + 1e-9)


MIXED = WeightExpr((WeightTerm(coef=1.0, power=0.5, exp_rate=-1.0),))


@settings(max_examples=40, deadline=None)
@given(
    points=st.lists(st.floats(min_value=1e-3, max_value=30.0), min_size=3, max_size=3, unique=True),
    weight=st.sampled_from([power(1.5), power(-0.5), MIXED]),
)
def test_integral_is_additive_and_monotone(points, weight):
    """∫_a^c = ∫_a^b + ∫_b^c, croissante en b et décroissante en a"""
    a, b, c = sorted(points)
    whole = integrate_weight(weight, a, c)
    left, right = integrate_weight(weight, a, b), integrate_weight(weight, b, c)
    assert left + right == pytest.approx(whole, rel=2e-8)
    assert left <= whole * (1 + 1e-9)
    assert integrate_weight(weight, b, c) <= whole * (1 + 1e-9)


@settings(max_examples=25, deadline=None)
@given(
    p=st.floats(min_value=1.2, max_value=4.0),
    lam=st.floats(min_value=0.1, max_value=10.0),
    t=st.floats(min_value=1e-2, max_value=10.0),
)
def test_sigma_tail_scaling(p, lam, t):
    """v -> λv multiplie sigma par λ^{1-p'}"""
    v = WeightExpr((WeightTerm(coef=1.0, power=0.5, exp_rate=1.0),))
    base = sigma_tail(v, p, t)
    expected = lam ** (1 - conjugate(p)) * base
    assert sigma_tail(v.scaled(lam), p, t) == pytest.approx(expected, rel=1e-8)
