import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_problem
from Core.copson_core import check_admissible, lhs_norm, phi, phi_power, ratio, rhs_norm
from Models.copson_grid import GridSpec
from Models.copson_problem import Parameters, TestFunction
from Models.copson_weights import WeightExpr, WeightTerm, constant, exponential, indicator, power
from utils import InvalidInputError


def test_phi_closed_form_unit_weights():
    """u = w = 1, q = m = 2: phi(t) = t/sqrt(2) sur toute la fenêtre"""
    problem = make_problem(2, 2, 2)
    ts = np.logspace(-3, 3, 200)
    errors = [abs(phi(problem, t) - t / math.sqrt(2)) / (t / math.sqrt(2)) for t in ts]
    assert max(errors) < 1e-6


def test_phi_by_quadrature_matches_closed_form():
    """u = 1 + 1 (deux termes, pas de forme close): phi(t)^2 = t^2"""
    u = WeightExpr((WeightTerm(coef=1.0), WeightTerm(coef=1.0, power=0.0, support=(0.0, math.inf))))
    problem = make_problem(2, 2, 2, u=u)
    for t in (0.01, 1.0, 50.0):
        assert phi(problem, t) == pytest.approx(t, rel=1e-6)


def test_phi_with_power_weights():
    """u = t, w = 1, q = m: phi^q = intégrale de (t^2 - s^2)/2 = t^3/3"""
    problem = make_problem(2, 1, 1, u=power(1.0))
    assert phi_power(problem, 2.0) == pytest.approx(8 / 3, rel=1e-10)


def test_phi_rejects_nonpositive_t():
    with pytest.raises(InvalidInputError):
        phi_power(make_problem(2, 2, 2), 0.0)


def test_admissibility_of_unit_weights():
    report = check_admissible(make_problem(2, 2, 2))
    assert report.admissible
    assert report.top_flag == 'inf'
    assert report.monotone
    assert report.vanishes_at_zero


def test_bounded_phi_gives_top_flag_zero():
    """u et w à support compact: phi est constante au-delà du support"""
    problem = make_problem(2, 2, 2, u=indicator(0.0, 2.0), w=indicator(0.0, 1.0))
    report = check_admissible(problem)
    assert report.admissible
    assert report.top_flag == '0'
    assert report.phi_power_at_infinity == pytest.approx(phi_power(problem, 2.0), rel=1e-10)


def test_zero_w_is_not_admissible():
    report = check_admissible(make_problem(2, 2, 2, w=WeightExpr(())))
    assert not report.admissible
    assert report.failures


def test_parameters_validation():
    with pytest.raises(InvalidInputError):
        Parameters(0.5, 1, 1)
    with pytest.raises(InvalidInputError):
        Parameters(2, 0, 1)
    params = Parameters(2, 1, 1)
    assert params.r == 2
    assert params.doubling == 4
    assert params.q_prime == math.inf
    assert params.r_over_q_prime == 0.0


def test_zero_test_function_has_zero_ratio(exp_problem):
    h = TestFunction.zeros(exp_problem)
    assert lhs_norm(exp_problem, h) == 0.0
    assert ratio(exp_problem, h) == 0.0


def test_test_function_must_live_on_problem_grid(exp_problem):
    other = make_problem(2, 2, 2, grid=GridSpec(1e-2, 1e2, 4))
    with pytest.raises(InvalidInputError):
        lhs_norm(exp_problem, TestFunction.zeros(other))


def test_rhs_norm_is_weighted_lp_norm():
    """v = 1, h = indicatrice de (1, 10): rhs = 9^{1/2}"""
    problem = make_problem(2, 2, 2, v=constant(1.0), grid=GridSpec(1e-1, 1e2, 4))
    h = TestFunction.indicator(problem, 1.0, 10.0)
    assert rhs_norm(problem, h) == pytest.approx(3.0, rel=1e-12)


def test_lhs_norm_of_an_indicator():
    """p = q = m = 2, u = w = 1: lhs^2 = intégrale de s H(s)^2 ds"""
    problem = make_problem(2, 2, 2, grid=GridSpec(1e-1, 1e1, 8))
    b = 10 ** 0.5
    h = TestFunction.indicator(problem, 1.0, b)
    # H = b - 1 sur (0, 1), b - s sur (1, b)
    expected = (b - 1) ** 2 / 2 + b * (b - 1) ** 3 / 3 - (b - 1) ** 4 / 4
    assert lhs_norm(problem, h) == pytest.approx(math.sqrt(expected), rel=1e-3)


@settings(max_examples=15, deadline=None)
@given(scale=st.floats(min_value=1e-3, max_value=1e3))
def test_ratio_is_scale_invariant(scale):
    problem = make_problem(2, 1, 1.5, grid=GridSpec(1e-2, 1e2, 4))
    h = TestFunction.from_callable(problem, lambda t: math.exp(-t))
    assert ratio(problem, h.scaled(scale)) == pytest.approx(ratio(problem, h), rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(min_value=1e-2, max_value=1e2))
def test_ratio_scales_with_v(lam):
    """v -> lambda v: le rapport est multiplié par lambda^{-1/p}"""
    problem = make_problem(3, 2, 2, grid=GridSpec(1e-2, 1e2, 4))
    scaled = problem.with_weights(v=problem.v.scaled(lam))
    h = TestFunction.from_callable(problem, lambda t: 1.0 / (1.0 + t * t))
    assert ratio(scaled, h) == pytest.approx(lam ** (-1 / 3) * ratio(problem, h), rel=1e-9)


def test_ratio_increases_with_w():
    base = make_problem(2, 2, 2, grid=GridSpec(1e-2, 1e2, 4))
    heavier = base.with_weights(w=constant(2.0))
    h = TestFunction.from_callable(base, lambda t: math.exp(-t))
    assert ratio(heavier, h) > ratio(base, h)


def test_p_equal_one_rhs_is_l1_norm():
    problem = make_problem(1, 1, 1, v=exponential(0.0), grid=GridSpec(1e-1, 1e1, 4))
    h = TestFunction.indicator(problem, 1.0, 3.0)
    assert rhs_norm(problem, h) == pytest.approx(2.0, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    lam=st.floats(min_value=1e-2, max_value=1e2),
    t=st.floats(min_value=1e-2, max_value=1e2),
)
def test_phi_scales_with_u_and_w(lam, t):
    """w -> λw: phi est multipliée par λ^{1/q}; u -> λu: par λ^{1/m}"""
    problem = make_problem(2, 1.5, 3, u=power(0.5), w=power(0.25))
    base = phi(problem, t)
    heavier_w = problem.with_weights(w=problem.w.scaled(lam))
    heavier_u = problem.with_weights(u=problem.u.scaled(lam))
    assert phi(heavier_w, t) == pytest.approx(lam ** (1 / 1.5) * base, rel=1e-8)
    assert phi(heavier_u, t) == pytest.approx(lam ** (1 / 3) * base, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(
    a=st.floats(min_value=-0.5, max_value=2.0),
    b=st.floats(min_value=-0.5, max_value=2.0),
)
def test_phi_is_nondecreasing(a, b):
    problem = make_problem(2, 2, 1.5, u=power(a), w=power(b), grid=GridSpec(1e-2, 1e2, 4))
    values = [phi(problem, float(t)) for t in problem.grid.nodes()]
    assert all(y >= x * (1 - 1e-10) for x, y in zip(values[:-1], values[1:]))


def test_phi_of_indicator_weights():
    """u = w = indicatrice de (0, 1], q = m = 2: phi(inf)^2 = 1/2 et K = 0"""
    problem = make_problem(2, 2, 2, u=indicator(0.0, 1.0), w=indicator(0.0, 1.0))
    report = check_admissible(problem)
    assert report.top_flag == '0'
    assert report.phi_power_at_infinity == pytest.approx(0.5, rel=1e-10)
    assert phi_power(problem, 5.0) == pytest.approx(0.5, rel=1e-10)


def test_lhs_norm_worked_example():
    """u = 1, w = h = indicatrice de (0, 1), m = q = 1: lhs = 1/6"""
    problem = make_problem(2, 1, 1, w=indicator(0.0, 1.0), grid=GridSpec(1e-4, 1e1, 8))
    h = TestFunction.indicator(problem, 0.0, 1.0)
    assert lhs_norm(problem, h) == pytest.approx(1 / 6, rel=2e-3)


def test_rhs_norm_worked_example():
    """v = e^t sur (0, 1), h = e^{-t/2}, p = 2: rhs = 1"""
    problem = make_problem(2, 2, 2, v=exponential(1.0, support=(0.0, 1.0)), grid=GridSpec(1e-4, 1.0, 16))
    h = TestFunction.from_callable(problem, lambda t: math.exp(-t / 2))
    assert rhs_norm(problem, h) == pytest.approx(1.0, rel=5e-3)


@settings(max_examples=15, deadline=None)
@given(extra=st.lists(st.floats(min_value=0.0, max_value=2.0), min_size=16, max_size=16))
def test_lhs_is_monotone_in_h(extra):
    problem = make_problem(2, 1, 1.5, grid=GridSpec(1e-2, 1e2, 4))
    h = TestFunction.from_callable(problem, lambda t: math.exp(-t))
    larger = TestFunction.from_array(problem, h.array + np.asarray(extra))
    assert lhs_norm(problem, larger) >= lhs_norm(problem, h) * (1 - 1e-12)
