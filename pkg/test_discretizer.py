import math

import numpy as np
import pytest

from conftest import make_problem
from Discretizer.discretizer import build_sequence, verify_sequence
from Models.copson_grid import GridSpec
from Models.copson_sequence import DiscretizingSequence, DiscretizingSequenceSchema
from Models.copson_weights import WeightExpr, indicator, power
from utils import InvalidInputError


def test_unit_weights_give_powers_of_four():
    """u = w = 1, q = m: t_k = 4^k (D = 4, seuil de W atteint en premier)"""
    problem = make_problem(2, 2, 2, anchor=1.0)
    seq = build_sequence(problem, root_tol=1e-12)
    t = np.array(seq.t)
    k = np.round(np.log(t) / np.log(4.0))
    np.testing.assert_allclose(t, 4.0 ** k, rtol=1e-8)
    assert t[0] <= problem.grid.t_min and t[-1] >= problem.grid.t_max
    assert all(label == 'K1' for label in seq.labels)
    assert seq.top_flag == 'inf'
    assert not seq.complete_low and not seq.complete_high


def test_anchor_shifts_the_sequence():
    problem = make_problem(2, 2, 2, anchor=3.0)
    seq = build_sequence(problem, root_tol=1e-12)
    assert any(t == pytest.approx(3.0, rel=1e-12) for t in seq.t)
    assert any(t == pytest.approx(12.0, rel=1e-8) for t in seq.t)


def test_unit_sequence_passes_verification():
    problem = make_problem(2, 2, 2)
    seq = build_sequence(problem)
    report = verify_sequence(problem, seq, root_tol=1e-8)
    assert report.passed
    assert report['w_equality'].worst_ratio == pytest.approx(1.0, rel=1e-8)
    assert report['phi_equality'].vacuous
    assert math.isfinite(report.copson9_constant)


def test_doubling_sequence_fails_w_growth():
    """t_k = 2^k est trop serrée: W(t_k) / (4 W(t_{k-1})) = 1/2"""
    problem = make_problem(2, 2, 2)
    seq = DiscretizingSequence(t=tuple(2.0 ** k for k in range(-5, 6)), labels=('K1',) * 11,
                               top_flag='inf', complete_low=False, complete_high=False)
    report = verify_sequence(problem, seq)
    assert not report.passed
    assert report['w_growth'].worst_ratio == pytest.approx(0.5, rel=1e-12)
    assert report.notes


def test_bounded_phi_builds_from_the_sentinel():
    """u à support (0, 1]: phi est bornée, la suite finit par la sentinelle inf"""
    problem = make_problem(2, 2, 2, u=indicator(0.0, 1.0))
    seq = build_sequence(problem)
    assert seq.top_flag == '0'
    assert seq.has_sentinel
    assert seq.complete_high
    assert seq.labels[-1] == 'K2'
    report = verify_sequence(problem, seq, root_tol=1e-8)
    assert report['phi_equality'].passed


def test_inadmissible_problem_is_rejected():
    with pytest.raises(InvalidInputError):
        build_sequence(make_problem(2, 2, 2, w=WeightExpr(())))


def test_short_sequence_is_vacuous():
    problem = make_problem(2, 2, 2)
    seq = DiscretizingSequence(t=(1.0,), labels=('K1',), top_flag='inf', complete_low=False, complete_high=False)
    report = verify_sequence(problem, seq)
    assert report.passed and report.vacuous


def test_sequence_validation():
    with pytest.raises(InvalidInputError):
        DiscretizingSequence(t=(1.0, 1.0), labels=('K1', 'K1'), top_flag='inf',
                             complete_low=False, complete_high=False)
    with pytest.raises(InvalidInputError):
        DiscretizingSequence(t=(1.0, 2.0), labels=('K1', 'K3'), top_flag='inf',
                             complete_low=False, complete_high=False)
    with pytest.raises(InvalidInputError):
        DiscretizingSequence(t=(1.0, 2.0), labels=('K1',), top_flag='inf',
                             complete_low=False, complete_high=False)


def test_sequence_schema_reads_infinity():
    seq = DiscretizingSequenceSchema().load({
        't': [1.0, 4.0, 'inf'], 'labels': ['K1', 'K1', 'K2'], 'top_flag': '0',
        'complete_low': False, 'complete_high': True,
    })
    assert seq.has_sentinel
    assert seq.cells()[-1] == (4.0, math.inf)


def seeded_power_problem(seed):
    """Poids puissances u = t^a, w = t^b, v = t^c; le régime suit seed % 4"""
    rng = np.random.default_rng(seed)
    p = rng.uniform(1.5, 3.0)
    low, high = rng.uniform(0.3, 0.9), rng.uniform(1.0, 1.5)
    q, m = {
        0: (p * high, p * rng.uniform(1.0, 1.5)),
        1: (p * low, p * high),
        2: (p * high, p * rng.uniform(0.3, 0.9)),
        3: (p * low, p * rng.uniform(0.4, 0.9)),
    }[seed % 4]
    a, b, c = rng.uniform(0.0, 1.5), rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 2.0)
    return make_problem(p, q, m, u=power(a), w=power(b), v=power(c), grid=GridSpec(1e-2, 1e2, 4))


@pytest.mark.parametrize('seed', range(20))
def test_power_weight_sequences_verify(seed):
    """Propriétés de croissance et d'égalité sur des poids puissances"""
    problem = seeded_power_problem(seed)
    seq = build_sequence(problem, root_tol=1e-10)
    report = verify_sequence(problem, seq, root_tol=1e-8)
    assert report.passed, report.notes
    assert seq.t[0] <= 1e-2 and seq.t[-1] >= 1e2


def test_anchor_on_the_lattice_gives_the_same_sequence():
    """u = w = 1: ancres 1 et 4 donnent le même réseau 4^k"""
    first = build_sequence(make_problem(2, 2, 2, anchor=1.0), root_tol=1e-12)
    second = build_sequence(make_problem(2, 2, 2, anchor=4.0), root_tol=1e-12)
    np.testing.assert_allclose(first.t, second.t, rtol=1e-8)


@pytest.mark.parametrize('seed', [1, 3, 6])
def test_restarting_from_a_sequence_point_reproduces_the_sequence(seed):
    problem = seeded_power_problem(seed)
    seq = build_sequence(problem, root_tol=1e-12)
    finite = np.array([t for t in seq.t if math.isfinite(t)])
    restart = finite[len(finite) // 2]
    again = build_sequence(problem.with_anchor(restart), root_tol=1e-12)
    t_min, t_max = problem.grid.t_min, problem.grid.t_max
    for t in again.t:
        if t_min <= t <= t_max:
            assert np.min(np.abs(finite - t) / t) < 1e-6


def test_perturbed_anchor_still_verifies():
    problem = make_problem(2, 1, 1.5, u=power(0.5), w=power(0.25), grid=GridSpec(1e-2, 1e2, 4), anchor=1.3)
    seq = build_sequence(problem, root_tol=1e-10)
    assert any(t == pytest.approx(1.3, rel=1e-12) for t in seq.t)
    assert verify_sequence(problem, seq, root_tol=1e-8).passed


def test_top_flag_is_written_as_infinity():
    seq = DiscretizingSequence(t=(1.0, 4.0), labels=('K1', 'K1'), top_flag='inf',
                               complete_low=False, complete_high=False)
    dumped = DiscretizingSequenceSchema().dump(seq)
    assert dumped['top_flag'] == math.inf
    assert DiscretizingSequenceSchema().load(dumped).top_flag == 'inf'
