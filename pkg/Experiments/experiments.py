import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from Conditions.conditions import classify_regime, eval_condition, theorem_bound
from Conditions.discrete import discrete_bound
from Discretizer.discretizer import build_sequence
from Models.copson_experiments import DichotomyCase, FamilySpec
from Models.copson_grid import GridSpec
from Models.copson_problem import Parameters, Problem, ProblemSchema
from Models.copson_reports import CounterexampleRow, CounterexampleTable, DichotomyResult, SweepRecord
from Models.copson_weights import WeightExpr, WeightTerm, constant, indicator
from Persistence.persistence import digest
from Variational.variational import DEFAULT_BUDGET, DEFAULT_MAX_SEEDS, estimate_C, upper_bound_d
from Weights.weights import conjugate, sigma_tail, single_term, xdiv
from utils import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_N_LIST = (1, 10, 100, 1000)
DEFAULT_GRID = GridSpec(1e-3, 1e3, 8)
STABLE_CHANGE = 0.05
GROWTH_FACTOR = 2.0

# Triplets (p, q, m) représentatifs de chaque régime
REGIME_PARAMETERS = {
    'a': (2.0, 2.0, 2.0),
    'b': (2.0, 1.0, 2.0),
    'c': (2.0, 2.0, 1.0),
    'd': (2.0, 1.0, 1.5),
}


def counterexample_weights(p, q, m):
    """u = 1 et v = t^{p/m+p-1}|ln t|^{(p-q)/(p'(q-1))} sur (0, 1/2], e^t au-delà"""
    if q == 1:
        raise InvalidInputError("Le poids v du contre-exemple n'est pas défini pour q = 1")
    log_power = (p - q) / (conjugate(p) * (q - 1))
    v = WeightExpr((
        WeightTerm(coef=1.0, power=p / m + p - 1, log_power=log_power, support=(0.0, 0.5)),
        WeightTerm(coef=1.0, exp_rate=1.0, support=(0.5, math.inf)),
    ))
    return constant(1.0), v


def counterexample_problem(p, q, m, n, grid=DEFAULT_GRID):
    """Problème du contre-exemple avec w_n = n sur (0, 1/n]"""
    if not (0 < q < m < p and p > 1):
        raise InvalidInputError(f"Le contre-exemple exige 0 < q < m < p et p > 1 (reçu p={p}, q={q}, m={m})")
    if int(n) != n or n < 1:
        raise InvalidInputError(f"n doit être un entier >= 1 (reçu {n})")
    u, v = counterexample_weights(p, q, m)
    return Problem(Parameters(p, q, m), u, v, indicator(0.0, 1.0 / n, height=float(n)), grid)


def run_counterexample(p=2.0, q=0.5, m=0.75, n_list=DEFAULT_N_LIST, grid=DEFAULT_GRID, budget=0,
                       max_seeds=DEFAULT_MAX_SEEDS, rel_tol=1e-8):
    """Table (n, A6, minorant de C_n, majorant indépendant de w)"""
    if not n_list:
        raise InvalidInputError("n_list ne doit pas être vide")
    problems = [counterexample_problem(p, q, m, n, grid) for n in n_list]
    bound, bound_diagnostics = upper_bound_d(problems[0], rel_tol)

    rows = []
    for n, problem in zip(n_list, problems):
        a6 = eval_condition(problem, 'A6', rel_tol).value
        c_lower = estimate_C(problem, budget=budget, max_seeds=max_seeds).lower_bound
        rows.append(CounterexampleRow(n=int(n), a6=a6, c_lower=c_lower, upper_bound_d=bound))
        logger.info(f"Counterexample n={n}: A6={a6:.6g}, C lower={c_lower:.6g}")

    a6_values = [row.a6 for row in rows]
    order = np.argsort(n_list, kind='stable')
    sorted_a6 = [a6_values[i] for i in order]
    a6_monotone = all(b >= a * (1 - 1e-9) for a, b in zip(sorted_a6[:-1], sorted_a6[1:]))
    bounded = all(row.c_lower <= bound * (1 + 1e-9) for row in rows)
    if not a6_monotone:
        logger.warning("A6 is not nondecreasing in n")
    if not bounded:
        logger.warning(f"Some C lower bounds exceed the window value {bound:.6g} of the upper bound")
    diagnostics = {
        'upper_bound': bound_diagnostics,
        'a6_growth': xdiv(sorted_a6[-1], sorted_a6[0]),
    }
    return CounterexampleTable(rows=tuple(rows), a6_monotone=a6_monotone, bounded=bounded, diagnostics=diagnostics)


def regime_family(label, grid=None):
    if label not in REGIME_PARAMETERS:
        raise InvalidInputError(f"Régime inconnu: {label}")
    p, q, m = REGIME_PARAMETERS[label]
    return FamilySpec(p, q, m, grid=grid)


def sample_problem(family, rng, grid):
    a = rng.uniform(*family.u_power)
    b = rng.uniform(*family.w_power)
    c = rng.uniform(*family.v_power)
    gamma = rng.uniform(*family.v_rate)
    return Problem(
        Parameters(family.p, family.q, family.m),
        WeightExpr((WeightTerm(coef=1.0, power=a),)),
        WeightExpr((WeightTerm(coef=1.0, power=c, exp_rate=gamma),)),
        WeightExpr((WeightTerm(coef=1.0, power=b),)),
        family.grid or grid,
    )


def _relative_change(a, b):
    if a == b:
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return abs(b - a) / max(abs(a), 1e-300)


def sweep_row(index, problem, budget=DEFAULT_BUDGET, max_seeds=DEFAULT_MAX_SEEDS, rel_tol=1e-8, refine=False):
    """Une ligne du balayage; les erreurs sont enregistrées dans la ligne"""
    key = digest(ProblemSchema().dump_problem(problem))
    regime = classify_regime(problem.params)
    try:
        bound = theorem_bound(problem, rel_tol).value
        estimate = estimate_C(problem, budget=budget, max_seeds=max_seeds)
        c_lower = estimate.lower_bound
        ratio = c_lower / bound if math.isfinite(bound) and math.isfinite(c_lower) and bound > 0 else None
        d_value = d_over_a = None
        if problem.params.p > 1:
            d_value, _ = discrete_bound(problem, build_sequence(problem), regime.label)
            d_over_a = d_value / bound if math.isfinite(d_value) and math.isfinite(bound) and bound > 0 else None
        delta = None
        if refine:
            fine = estimate_C(problem.with_grid(problem.grid.refined()), budget=budget, max_seeds=max_seeds,
                              warm_start=(estimate.best_h,))
            delta = _relative_change(c_lower, fine.lower_bound)
    except (ValueError, NumericalError) as e:
        logger.warning(f"Sweep row {index} failed: {str(e)}")
        return SweepRecord(index=index, digest=key, regime=regime.label, theorem_bound=None, c_lower=None,
                           ratio=None, d_value=None, d_over_a=None, error=str(e))
    return SweepRecord(index=index, digest=key, regime=regime.label, theorem_bound=bound, c_lower=c_lower,
                       ratio=ratio, d_value=d_value, d_over_a=d_over_a, refinement_delta=delta)


def run_equivalence_sweep(family, count, seed=0, grid=DEFAULT_GRID, budget=DEFAULT_BUDGET,
                          max_seeds=DEFAULT_MAX_SEEDS, rel_tol=1e-8, refine=False, workers=1):
    """Tire `count` problèmes de la famille et compare minorant de C, conditions A et D"""
    if count < 0:
        raise InvalidInputError("count doit être positif ou nul")
    rng = np.random.default_rng(seed)
    problems = [sample_problem(family, rng, grid) for _ in range(count)]
    args = [(i, problem, budget, max_seeds, rel_tol, refine) for i, problem in enumerate(problems)]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(sweep_row, *zip(*args)))
    else:
        records = [sweep_row(*arg) for arg in args]
    records.sort(key=lambda record: record.index)
    logger.info(f"Sweep finished: {count} rows, {sum(r.error is not None for r in records)} errors")
    return records


def summarize_sweep(records):
    """Enveloppes par régime: min/max de C/A et de D/A"""
    summary = {}
    for record in records:
        entry = summary.setdefault(record.regime, {'count': 0, 'errors': 0, 'ratios': [], 'd_over_a': []})
        entry['count'] += 1
        if record.error is not None:
            entry['errors'] += 1
            continue
        if record.ratio is not None:
            entry['ratios'].append(record.ratio)
        if record.d_over_a is not None:
            entry['d_over_a'].append(record.d_over_a)
    out = {}
    for regime, entry in summary.items():
        ratios, agreement = entry['ratios'], entry['d_over_a']
        out[regime] = {
            'count': entry['count'],
            'errors': entry['errors'],
            'min_ratio': min(ratios) if ratios else None,
            'max_ratio': max(ratios) if ratios else None,
            'width': xdiv(max(ratios), min(ratios)) if ratios else None,
            'min_d_over_a': min(agreement) if agreement else None,
            'max_d_over_a': max(agreement) if agreement else None,
        }
    return out


def _power_exponents(problem):
    """Exposants (a, b, c) de u, w, v s'ils sont des puissances pures sur (0, inf)"""
    terms = [single_term(problem.u), single_term(problem.w), single_term(problem.v)]
    if any(term is None or term.support != (0.0, math.inf) or term.log_power != 0 for term in terms):
        return None
    return terms


def expected_finiteness(problem):
    """Finitude attendue de la condition du régime par analyse des exposants dominants.

    Retourne 'finite', 'infinite' ou None quand l'analyse n'est pas concluante
    (seules les familles puissance/exponentielle à terme unique sont traitées).
    """
    params = problem.params
    if params.p > 1 and math.isinf(sigma_tail(problem.v, params.p, problem.grid.t_min)):
        return 'infinite'
    regime = classify_regime(params).label
    terms = _power_exponents(problem)
    if regime != 'a' or terms is None:
        return None
    u, w, v = terms
    if u.exp_rate != 0 or w.exp_rate != 0:
        return None
    p, q, m = params.p, params.q, params.m
    p_prime = conjugate(p)
    phi_exponent = ((u.power + 1) * q / m + w.power + 1) / q
    if v.exp_rate < 0:
        return 'infinite'
    # près de 0 (et à l'infini si v = t^c): sigma(t) ~ t^{c(1-p')+1} quand c(1-p') < -1
    exponent = phi_exponent + (v.power * (1 - p_prime) + 1) / p_prime
    if v.exp_rate > 0:
        if v.power * (1 - p_prime) > -1:
            return 'finite'
        return 'finite' if exponent >= -1e-12 else 'infinite'
    return 'finite' if abs(exponent) < 1e-12 else 'infinite'


def _classify_growth(levels):
    """'infinite' dès qu'un palier explose, 'finite' si tous les paliers sont stables"""
    if len(levels) < 2:
        return 'inconclusive'
    if any(math.isinf(x) for x in levels):
        return 'infinite'
    pairs = list(zip(levels[:-1], levels[1:]))
    if any(previous > 0 and last >= GROWTH_FACTOR * previous for previous, last in pairs):
        return 'infinite'
    if all(_relative_change(previous, last) < STABLE_CHANGE for previous, last in pairs):
        return 'finite'
    return 'inconclusive'


def finiteness_dichotomy(cases, levels=3, factor=2.0, budget=0, max_seeds=DEFAULT_MAX_SEEDS):
    """Minorant de C sous élargissement successif de la fenêtre, comparé à la finitude attendue"""
    results = []
    for case in cases:
        if not isinstance(case, DichotomyCase):
            raise InvalidInputError("Chaque cas doit être un DichotomyCase")
        expected = case.expected or expected_finiteness(case.problem)
        values = []
        warm = ()
        for level in range(levels):
            grid = case.problem.grid.widened(factor ** level) if level else case.problem.grid
            estimate = estimate_C(case.problem.with_grid(grid), budget=budget, max_seeds=max_seeds, warm_start=warm)
            values.append(estimate.lower_bound)
            warm = (estimate.best_h,)
        observed = _classify_growth(values)
        inconclusive = expected is None or observed == 'inconclusive'
        passed = inconclusive or observed == expected
        if not passed:
            logger.warning(f"Dichotomy case {case.name}: expected {expected}, observed {observed}")
        results.append(DichotomyResult(
            name=case.name,
            expected=expected,
            observed=observed,
            levels=tuple(values),
            passed=passed,
            inconclusive=inconclusive,
        ))
    return results
