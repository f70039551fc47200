import math

import pytest

from conftest import make_problem
from Experiments.experiments import (
    _classify_growth, counterexample_problem, counterexample_weights, expected_finiteness, finiteness_dichotomy,
    regime_family, run_counterexample, run_equivalence_sweep, summarize_sweep,
)
from Models.copson_experiments import DichotomyCase, FamilySpec
from Models.copson_grid import GridSpec
from Models.copson_weights import WeightExpr, WeightTerm, constant, exponential, power
from Persistence.persistence import compare_with_baseline, read_baseline, write_baseline
from utils import InvalidInputError

SMALL_GRID = GridSpec(1e-2, 1e2, 4)
DICHOTOMY_GRID = GridSpec(1e-2, 1e2, 8)


@pytest.fixture(scope='module')
def counterexample_table():
    return run_counterexample()


def test_counterexample_a6_grows_while_c_stays_bounded(counterexample_table):
    """A6 croît avec n alors que le minorant de C_n reste sous le majorant indépendant de w"""
    table = counterexample_table
    assert [row.n for row in table.rows] == [1, 10, 100, 1000]
    assert table.a6_monotone
    assert table.bounded
    assert table.diagnostics['a6_growth'] >= 2.0
    assert len({row.upper_bound_d for row in table.rows}) == 1
    assert table.diagnostics['upper_bound']['endpoint_zero']['divergent']


def test_counterexample_repeated_n_gives_identical_rows():
    table = run_counterexample(n_list=(1, 1), grid=SMALL_GRID)
    assert table.rows[0] == table.rows[1]
    assert table.a6_monotone


def test_counterexample_parameter_checks():
    with pytest.raises(InvalidInputError):
        counterexample_weights(2.0, 1.0, 1.5)
    with pytest.raises(InvalidInputError):
        counterexample_problem(2.0, 0.8, 0.75, 1)
    with pytest.raises(InvalidInputError):
        counterexample_problem(2.0, 0.5, 0.75, 0)
    with pytest.raises(InvalidInputError):
        run_counterexample(n_list=())


def test_counterexample_w_is_a_spike():
    problem = counterexample_problem(2.0, 0.5, 0.75, 10)
    term = problem.w.terms[0]
    assert term.coef == 10.0
    assert term.support == (0.0, 0.1)


def test_sweep_is_reproducible():
    family = regime_family('a')
    first = run_equivalence_sweep(family, 2, seed=3, grid=SMALL_GRID, budget=0)
    second = run_equivalence_sweep(family, 2, seed=3, grid=SMALL_GRID, budget=0)
    assert first == second
    assert [record.index for record in first] == [0, 1]
    for record in first:
        assert record.error is None
        assert record.regime == 'a'
        assert record.ratio > 0
        assert len(record.digest) == 64


def test_sweep_summary():
    records = run_equivalence_sweep(regime_family('c'), 2, seed=1, grid=SMALL_GRID, budget=0)
    summary = summarize_sweep(records)
    assert summary['c']['count'] == 2
    assert summary['c']['width'] >= 1.0
    assert summary['c']['min_d_over_a'] is not None


def test_empty_sweep():
    assert run_equivalence_sweep(regime_family('a'), 0) == []
    assert summarize_sweep([]) == {}
    with pytest.raises(InvalidInputError):
        run_equivalence_sweep(regime_family('a'), -1)


def test_family_validation():
    with pytest.raises(InvalidInputError):
        regime_family('e')
    with pytest.raises(InvalidInputError):
        FamilySpec(2, 2, 2, u_power=(1.0, 0.0))
    with pytest.raises(InvalidInputError):
        FamilySpec(2, 2, 2, w_power=(-1.0, 0.0))


def test_expected_finiteness(exp_problem, unit_problem):
    assert expected_finiteness(exp_problem) == 'finite'
    assert expected_finiteness(unit_problem) == 'infinite'
    # v = t^3: sigma(t) = t^{-2}/2 et A1 = 1/2 à toute échelle
    assert expected_finiteness(make_problem(2, 2, 2, v=power(3.0))) == 'finite'
    assert expected_finiteness(make_problem(2, 2, 2, v=power(2.0))) == 'infinite'
    assert expected_finiteness(make_problem(2, 1, 2)) is None


def test_finiteness_dichotomy():
    cases = [
        DichotomyCase('exponential', make_problem(2, 2, 2, grid=DICHOTOMY_GRID)),
        DichotomyCase('unit', make_problem(2, 2, 2, v=constant(1.0), grid=DICHOTOMY_GRID)),
    ]
    results = finiteness_dichotomy(cases, levels=3)
    by_name = {result.name: result for result in results}
    assert by_name['exponential'].expected == 'finite'
    assert by_name['exponential'].observed == 'finite'
    assert by_name['unit'].expected == 'infinite'
    assert by_name['unit'].observed == 'infinite'
    assert all(result.passed for result in results)
    assert len(by_name['unit'].levels) == 3


def test_dichotomy_edge_cases():
    assert finiteness_dichotomy([]) == []
    with pytest.raises(InvalidInputError):
        finiteness_dichotomy([make_problem(2, 2, 2)])
    with pytest.raises(InvalidInputError):
        DichotomyCase('bad', make_problem(2, 2, 2), expected='bounded')


def test_growth_is_judged_at_every_widening():
    """Un saut ×10 au premier élargissement suffit, même si la suite se stabilise ensuite"""
    assert _classify_growth([1.0, 10.0, 10.05]) == 'infinite'
    assert _classify_growth([1.0, 1.01, 1.02]) == 'finite'
    assert _classify_growth([1.0, 1.3, 1.31]) == 'inconclusive'
    assert _classify_growth([1.0, math.inf]) == 'infinite'
    assert _classify_growth([1.0]) == 'inconclusive'


FINITE_CASES = [
    ('exp', make_problem(2, 2, 2, grid=DICHOTOMY_GRID)),
    ('exp_fast', make_problem(2, 2, 2, v=exponential(2.0), grid=DICHOTOMY_GRID)),
    ('exp_q3', make_problem(2, 3, 2, grid=DICHOTOMY_GRID)),
    ('exp_power', make_problem(2, 2, 2, v=WeightExpr((WeightTerm(coef=1.0, power=0.5, exp_rate=1.0),)),
                               grid=DICHOTOMY_GRID)),
    ('exp_p15', make_problem(1.5, 2, 2, grid=DICHOTOMY_GRID)),
    ('exp_u_power', make_problem(2, 2, 2, u=power(0.5), grid=DICHOTOMY_GRID)),
]

INFINITE_CASES = [
    ('unit', make_problem(2, 2, 2, v=constant(1.0), grid=DICHOTOMY_GRID)),
    ('sqrt', make_problem(2, 2, 2, v=power(0.5), grid=DICHOTOMY_GRID)),
    ('inverse', make_problem(2, 2, 2, v=power(-1.0), grid=DICHOTOMY_GRID)),
    ('square', make_problem(2, 2, 2, v=power(2.0), grid=DICHOTOMY_GRID)),
    ('quartic', make_problem(2, 2, 2, v=power(4.0), grid=DICHOTOMY_GRID)),
    ('linear_q3', make_problem(2, 3, 2, v=power(1.0), grid=DICHOTOMY_GRID)),
]


@pytest.mark.slow
def test_finiteness_dichotomy_six_and_six():
    cases = [DichotomyCase(name, problem) for name, problem in FINITE_CASES + INFINITE_CASES]
    results = finiteness_dichotomy(cases, levels=3, factor=16.0)
    by_name = {result.name: result for result in results}
    for name, _ in FINITE_CASES:
        assert by_name[name].expected == 'finite'
        assert by_name[name].observed == 'finite', by_name[name].levels
    for name, _ in INFINITE_CASES:
        assert by_name[name].expected == 'infinite'
        assert by_name[name].observed == 'infinite', by_name[name].levels
    assert all(result.passed and not result.inconclusive for result in results)


@pytest.mark.slow
@pytest.mark.parametrize('label', ['a', 'b', 'c', 'd'])
def test_regime_sweep_against_recorded_baseline(label, tmp_path):
    """Vingt problèmes par régime, graine fixe, largeur comparée à la ligne de base enregistrée"""
    family = regime_family(label)
    records = run_equivalence_sweep(family, 20, seed=0, grid=SMALL_GRID, budget=0)
    assert len(records) == 20
    for record in records:
        assert record.error is None
        assert record.ratio is not None and math.isfinite(record.ratio) and record.ratio > 0
    summary = summarize_sweep(records)[label]
    assert summary['count'] == 20
    assert math.isfinite(summary['width'])

    path = tmp_path / 'baseline.json'
    write_baseline({label: summary['width']}, path)
    again = summarize_sweep(run_equivalence_sweep(family, 20, seed=0, grid=SMALL_GRID, budget=0))[label]
    assert compare_with_baseline({label: again['width']}, read_baseline(path)) == {label: True}
