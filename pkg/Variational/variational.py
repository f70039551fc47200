import logging
import math

import numpy as np
from scipy import optimize

from Core.copson_core import DEFAULT_LEFT_TAIL_DECADES, DEFAULT_SUB_CELLS, problem_functional, ratio
from Models.copson_grid import GridSpec
from Models.copson_problem import TestFunction
from Models.copson_reports import CEstimate, ConditionValue, Saturator
from Quadrature.quadrature import FunctionalGrid, integrate, sup_on_interval
from Weights.weights import (
    conjugate, cumulative_weight, dual_integral, eval_weight, integrate_weight, sigma_tail,
    xdiv, xmul, xpow,
)
from utils import InvalidInputError, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 40
DEFAULT_MAX_SEEDS = 4
# Candidats log-uniformes autour de la valeur courante d'une coordonnée
CANDIDATE_SPAN = 6.0
CANDIDATE_COUNT = 25
ACCEPT_GAIN = 1e-12
HARDY_THETAS = (0.0, 0.5, 1.0)
HARDY_GRID = GridSpec(1e-3, 1e3, 16)


def holder_function(v, p, a, b):
    """g = v^{1-p'} (intégrale de v^{1-p'} sur (a, b))^{-1/p} sur (a, b), nulle ailleurs"""
    if not p > 1:
        raise InvalidInputError("Le saturateur de Hölder exige p > 1")
    mass = dual_integral(v, p, a, b)
    if not 0 < mass < math.inf:
        raise InvalidInputError(f"Queue duale dégénérée sur ({a}, {b}): {mass}")
    scale = mass ** (-1 / p)
    dual = 1 - conjugate(p)

    def g(t):
        if not a < t <= b:
            return 0.0
        return xpow(eval_weight(v, t), dual) * scale

    return g, mass


def _project(problem, g, a, b):
    """Moyennes de g sur les cellules de la grille (intégrale exacte par quadrature)"""
    nodes = problem.grid.nodes()
    values = []
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        left, right = max(lo, a), min(hi, b)
        if not right > left:
            values.append(0.0)
            continue
        values.append(integrate(g, left, right, 1e-10, problem.breakpoints()).value / (hi - lo))
    return TestFunction(tuple(nodes), tuple(values))


def holder_saturator(problem, a, b):
    """Fonction qui sature l'inégalité de Hölder sur (a, b) pour le poids v"""
    p = problem.params.p
    g, mass = holder_function(problem.v, p, a, b)
    normalization = integrate(lambda t: xmul(xpow(g(t), p), eval_weight(problem.v, t)),
                              a, b, 1e-10, problem.breakpoints()).value
    integral = integrate(g, a, b, 1e-10, problem.breakpoints()).value
    return Saturator(
        kind='holder',
        interval=(a, b),
        test_function=_project(problem, g, a, b),
        normalization=normalization,
        ratio=xdiv(integral, mass ** (1 / conjugate(p))),
    )


def _ascent(functional, h, sweeps, trace):
    """Montée par coordonnées: mise à jour de rang 1 des queues, pas accepté seulement s'il améliore"""
    h = np.array(h, dtype=float)
    columns = functional.columns
    masses = functional.masses
    p = functional.p
    tails = columns @ h
    rhs_power = float(functional.rhs_power(h))
    current = xdiv(float(functional.lhs_from_tails(tails)), xpow(rhs_power, 1 / p))
    if math.isinf(current):
        return h, current
    offsets = np.geomspace(10.0 ** -CANDIDATE_SPAN, 10.0 ** CANDIDATE_SPAN, CANDIDATE_COUNT)

    def ratios_for(i, xs):
        xs = np.asarray(xs, dtype=float)
        candidate_tails = tails[:, None] + np.outer(columns[:, i], xs - h[i])
        lhs = np.atleast_1d(functional.lhs_from_tails(candidate_tails))
        rest = rhs_power - xpow(h[i], p) * masses[i]
        rhs = np.power(np.maximum(rest + np.power(xs, p) * masses[i], 0.0), 1 / p)
        return np.array([xdiv(float(x), float(y)) for x, y in zip(lhs, rhs)])

    for _ in range(sweeps):
        improved = False
        for i in range(h.size):
            scale = h[i] if h[i] > 0 else (np.mean(h[h > 0]) if np.any(h > 0) else 1.0)
            xs = np.concatenate([[0.0], scale * offsets])
            values = ratios_for(i, xs)
            k = int(np.argmax(values))
            best_x, best = float(xs[k]), float(values[k])
            if k > 0 and math.isfinite(best):
                lo = math.log(xs[max(k - 1, 1)])
                hi = math.log(xs[min(k + 1, xs.size - 1)])
                if hi > lo:
                    result = optimize.minimize_scalar(
                        lambda x: -float(ratios_for(i, [math.exp(x)])[0]),
                        bounds=(lo, hi), method='bounded', options={'xatol': 1e-6},
                    )
                    if -result.fun > best:
                        best_x, best = math.exp(result.x), float(-result.fun)
            if best > current * (1 + ACCEPT_GAIN) and (best_x > 0 or np.count_nonzero(h) > 1):
                tails = tails + columns[:, i] * (best_x - h[i])
                rhs_power += (xpow(best_x, p) - xpow(h[i], p)) * masses[i]
                h[i] = best_x
                current = best
                trace.append(current)
                improved = True
                if math.isinf(current):
                    return h, current
        if not improved:
            break
    return h, current


def _normalized(functional, h):
    norm = float(functional.rhs(h))
    if norm > 0 and math.isfinite(norm):
        return h / norm
    return h


def _tail_seed(functional, j):
    """Saturateur de Hölder discret sur les cellules d'indice >= j"""
    p = functional.p
    widths = functional.grid.widths
    masses = functional.masses
    h = np.zeros(functional.size)
    if np.any(masses[j:] == 0):
        # v nul sur une cellule de la queue: rapport infini
        h[j + int(np.flatnonzero(masses[j:] == 0)[0])] = 1.0
        return h
    if p == 1:
        best = j + int(np.argmax(widths[j:] / masses[j:]))
        h[best] = 1.0 / masses[best]
        return h
    h[j:] = np.power(widths[j:] / masses[j:], 1 / (p - 1))
    return _normalized(functional, h)


def _block_seed(functional, lo, hi):
    p = functional.p
    widths = functional.grid.widths
    masses = functional.masses
    h = np.zeros(functional.size)
    if hi <= lo:
        return h
    if p == 1 or np.any(masses[lo:hi] == 0):
        k = lo + int(np.argmax(xdiv_array(widths[lo:hi], masses[lo:hi])))
        h[k] = 1.0
        return _normalized(functional, h)
    h[lo:hi] = np.power(widths[lo:hi] / masses[lo:hi], 1 / (p - 1))
    return _normalized(functional, h)


def xdiv_array(a, b):
    return np.array([xdiv(float(x), float(y)) for x, y in zip(a, b)])


def _hardy_seeds(functional, problem):
    """Départs structurés h ∝ v^{1-p'} U^{θ1} L^{-θ2} sur la fenêtre entière"""
    p = functional.p
    if p == 1:
        return []
    nodes = functional.cells
    mids = np.sqrt(nodes[:-1] * nodes[1:])
    base = _tail_seed(functional, 0)
    U = np.array([cumulative_weight(problem.u, float(t)) for t in mids])
    L = np.array([dual_integral(problem.v, p, float(t), float(nodes[-1])) for t in mids])
    seeds = []
    for theta_u in HARDY_THETAS:
        for theta_l in HARDY_THETAS:
            if theta_u == 0 and theta_l == 0:
                continue
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                h = base * np.power(U, theta_u) * np.power(L, -theta_l)
            h = np.where(np.isfinite(h), h, 0.0)
            if np.any(h > 0):
                seeds.append((f'hardy({theta_u},{theta_l})', _normalized(functional, h)))
    return seeds


def _seeds(functional, problem, sequence):
    seeds = []
    for j in range(functional.size):
        seeds.append((f'tail[{j}]', _tail_seed(functional, j)))
    if sequence is not None:
        nodes = functional.cells
        for k, (a, b) in enumerate(sequence.cells()):
            lo = int(np.searchsorted(nodes, a, side='left'))
            hi = int(np.searchsorted(nodes, b, side='right')) - 1
            hi = min(hi, functional.size)
            if hi > lo:
                seeds.append((f'delta[{k}]', _block_seed(functional, lo, hi)))
    seeds.extend(_hardy_seeds(functional, problem))
    return seeds


def ratio_batch(functional, matrix):
    """Rapports pour une matrice (N, K) de fonctions test (une par colonne)"""
    return np.atleast_1d(functional.ratios(np.asarray(matrix, dtype=float)))


def estimate_C(problem, budget=DEFAULT_BUDGET, max_seeds=DEFAULT_MAX_SEEDS, sequence=None,
               sub_cells=DEFAULT_SUB_CELLS, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES, warm_start=()):
    """Minorant de la constante optimale par maximisation du rapport sur les fonctions test.

    Les graines (saturateurs de Hölder sur les queues et les cellules de la
    suite, départs de type Hardy, sommes deux à deux des meilleures) sont
    classées puis améliorées par montée par coordonnées. Le budget compte des
    balayages complets répartis sur les meilleures graines.

    Les fonctions de warm_start (obtenues sur une autre grille, typiquement
    plus grossière) sont transportées sur la grille du problème et ajoutées
    aux graines.
    """
    if budget < 0:
        raise InvalidInputError("Le budget doit être positif ou nul")
    functional = problem_functional(problem, sub_cells, left_tail_decades)
    seeds = _seeds(functional, problem, sequence)
    nodes = problem.grid.nodes()
    for k, previous in enumerate(warm_start):
        prolonged = previous.prolonged(nodes)
        if not prolonged.is_zero:
            seeds.append((f"warm[{k}]", prolonged.array))
    matrix = np.column_stack([h for _, h in seeds])
    scores = ratio_batch(functional, matrix)
    order = sorted(range(len(seeds)), key=lambda k: -scores[k])

    top = order[:max(2, max_seeds)]
    pairs = []
    for x in range(len(top)):
        for y in range(x + 1, len(top)):
            a, b = top[x], top[y]
            pairs.append((f'{seeds[a][0]}+{seeds[b][0]}',
                          _normalized(functional, seeds[a][1]) + _normalized(functional, seeds[b][1])))
    if pairs:
        pair_scores = ratio_batch(functional, np.column_stack([h for _, h in pairs]))
        seeds.extend(pairs)
        scores = np.concatenate([scores, pair_scores])
        order = sorted(range(len(seeds)), key=lambda k: -scores[k])

    flags = []
    trace = [float(scores[order[0]])]
    best_name, best_h, best_value = seeds[order[0]][0], seeds[order[0]][1], float(scores[order[0]])
    chosen = order[:max_seeds]
    sweeps = budget // max(len(chosen), 1)
    if budget > 0 and math.isfinite(best_value):
        for k in chosen:
            seed_trace = [float(scores[k])]
            h, value = _ascent(functional, seeds[k][1], max(sweeps, 1), seed_trace)
            if value > best_value:
                best_name, best_h, best_value = seeds[k][0], h, value
                trace = seed_trace

    h = TestFunction.from_array(problem, np.clip(best_h, 0.0, None))
    lower_bound = ratio(problem, h, sub_cells, left_tail_decades)
    if lower_bound == 0:
        flags.append('zero_ratio')
        logger.warning("All candidate test functions give a zero ratio")
    if math.isinf(lower_bound):
        flags.append('infinite_ratio')
    logger.info(f"C lower bound {lower_bound:.6g} from seed {best_name} ({len(seeds)} seeds, budget {budget})")
    return CEstimate(
        lower_bound=lower_bound,
        best_h=h,
        trace=tuple(trace),
        seeds=tuple(seeds[k][0] for k in chosen),
        method='coordinate_ascent' if budget > 0 else 'seeds_only',
        flags=tuple(flags),
    )


def upper_bound_d(problem, rel_tol=1e-8):
    """Majorant indépendant de w (cas m < p); valeur sur la fenêtre et analyse de l'extrémité 0.

    Retourne (valeur, diagnostics).
    """
    params = problem.params
    p, m = params.p, params.m
    if not (p > 1 and m < p):
        raise InvalidInputError(f"upper_bound_d exige p > 1 et m < p (reçu p={p}, m={m})")
    t_min, t_max = problem.grid.t_min, problem.grid.t_max
    diagnostics = {'window': [t_min, t_max]}
    if problem.u.is_zero:
        return 0.0, diagnostics
    nodes = problem.grid.nodes()
    if any(math.isinf(sigma_tail(problem.v, p, float(t))) for t in nodes):
        diagnostics['diverging_layer'] = 'sigma_tail'
        return math.inf, diagnostics
    dual = 1 - conjugate(p)

    def f(t):
        return xmul(
            xmul(xpow(cumulative_weight(problem.u, t), p / (p - m)),
                 xpow(sigma_tail(problem.v, p, t), p * (m - 1) / (p - m))),
            xpow(eval_weight(problem.v, t), dual),
        )

    try:
        total = integrate(f, t_min, t_max, rel_tol, problem.breakpoints()).value
    except QuadratureError as e:
        diagnostics['quadrature'] = 'tolerance_not_met'
        total = e.estimate.value if e.estimate is not None else math.inf
    diagnostics['endpoint_zero'] = _endpoint_exponents(problem)
    return xpow(total, (p - m) / (m * p)), diagnostics


def _endpoint_exponents(problem):
    """Exposants (puissance, logarithme) de l'intégrande au voisinage de 0"""
    p, m = problem.params.p, problem.params.m
    u_terms = [t for t in problem.u.active_terms if t.support[0] == 0]
    v_terms = [t for t in problem.v.active_terms if t.support[0] == 0]
    if not u_terms or not v_terms or any(t.exp_rate for t in u_terms + v_terms):
        return {'conclusive': False}
    u0 = min(u_terms, key=lambda t: (t.power, -t.log_power))
    v0 = min(v_terms, key=lambda t: (t.power, -t.log_power))
    dual = 1 - conjugate(p)
    # U ~ t^{a+1}|ln t|^k ; v^{1-p'} ~ t^{b(1-p')}|ln t|^{l(1-p')}
    a_pow, a_log = u0.power + 1, u0.log_power
    d_pow, d_log = v0.power * dual, v0.log_power * dual
    if d_pow < -1:
        s_pow, s_log = d_pow + 1, d_log
    else:
        s_pow, s_log = 0.0, 0.0
    e_u, e_s = p / (p - m), p * (m - 1) / (p - m)
    power = a_pow * e_u + s_pow * e_s + d_pow
    log_power = a_log * e_u + s_log * e_s + d_log
    divergent = integrability_at_zero(power, log_power)
    return {'conclusive': True, 'power': power, 'log_power': log_power, 'divergent': divergent}


def integrability_at_zero(power, log_power):
    return power < -1 or (abs(power + 1) < 1e-12 and log_power >= -1)


class HardyFunctional:
    """Fonctionnelle de Hardy à une couche: (intégrale de (queue de g)^beta rho)^{1/beta} / (intégrale de g^alpha eta)^{1/alpha}"""

    def __init__(self, cells, alpha, beta, eta, rho, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES,
                 sub_cells=DEFAULT_SUB_CELLS):
        self.p = alpha
        self.beta = beta
        self.cells = np.asarray(cells, dtype=float)
        self.grid = FunctionalGrid(self.cells, sub_cells=sub_cells, left_tail_decades=left_tail_decades)
        self.rho_fine = eval_weight(rho, self.grid.fine)
        self.masses = np.array([integrate_weight(eta, a, b) for a, b in zip(self.cells[:-1], self.cells[1:])])

    @property
    def size(self):
        return self.cells.size - 1

    @property
    def columns(self):
        return self.grid.columns

    def lhs_from_tails(self, tails):
        tails = np.asarray(tails, dtype=float)
        rho = self.rho_fine if tails.ndim == 1 else self.rho_fine[:, None]
        with np.errstate(over='ignore', invalid='ignore'):
            return np.power(self.grid.integrate(np.power(tails, self.beta) * rho), 1 / self.beta)

    def rhs_power(self, values):
        values = np.asarray(values, dtype=float)
        masses = self.masses if values.ndim == 1 else self.masses[:, None]
        return np.sum(np.where(values > 0, np.power(values, self.p) * masses, 0.0), axis=0)

    def rhs(self, values):
        return np.power(self.rhs_power(values), 1 / self.p)

    def ratios(self, values):
        lhs = np.atleast_1d(self.lhs_from_tails(self.grid.tails(values)))
        rhs = np.atleast_1d(self.rhs(values))
        out = np.array([xdiv(float(a), float(b)) for a, b in zip(lhs, rhs)])
        return out if np.ndim(values) > 1 else float(out[0])


def hardy_condition(alpha, beta, eta, rho, a, b, grid=HARDY_GRID):
    """Condition de Hardy: forme sup si alpha <= beta, forme intégrale si beta < alpha"""
    if not alpha > 1 or not beta > 0:
        raise InvalidInputError(f"Il faut alpha > 1 et beta > 0 (reçu alpha={alpha}, beta={beta})")
    alpha_prime = conjugate(alpha)
    if alpha <= beta:
        def f(t):
            return xmul(xpow(integrate_weight(rho, a, t), 1 / beta),
                        xpow(dual_integral(eta, alpha, t, b), 1 / alpha_prime))

        estimate = sup_on_interval(f, a, b, grid)
        return ConditionValue(name='hardy_i', value=estimate.value, argmax=estimate.argmax)

    dual = 1 - alpha_prime

    def g(t):
        return xmul(
            xmul(xpow(integrate_weight(rho, a, t), alpha / (alpha - beta)),
                 xpow(dual_integral(eta, alpha, t, b), alpha * (beta - 1) / (alpha - beta))),
            xpow(eval_weight(eta, t), dual),
        )

    total = integrate(g, a, b, 1e-10, tuple(sorted(set(eta.breakpoints()) | set(rho.breakpoints())))).value
    return ConditionValue(name='hardy_ii', value=xpow(total, (alpha - beta) / (alpha * beta)))


def hardy_ratio(alpha, beta, eta, rho, g, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES):
    """Rapport de la fonctionnelle de Hardy pour une fonction test g"""
    functional = HardyFunctional(g.nodes, alpha, beta, eta, rho, left_tail_decades)
    return functional.ratios(g.array)


def hardy_pair(alpha, beta, eta, rho, a, b, grid=HARDY_GRID, budget=DEFAULT_BUDGET):
    """Condition de Hardy et fonction presque saturante obtenue par départs structurés puis montée"""
    condition = hardy_condition(alpha, beta, eta, rho, a, b, grid)
    window = grid.restricted(a, b)
    cells = window.nodes()
    functional = HardyFunctional(cells, alpha, beta, eta, rho, left_tail_decades=8 if a == 0 else 0)
    if np.any(functional.masses <= 0):
        raise InvalidInputError("Le poids eta doit être strictement positif sur chaque cellule")

    seeds = [_tail_seed(functional, j) for j in range(functional.size)]
    mids = np.sqrt(cells[:-1] * cells[1:])
    R = np.array([integrate_weight(rho, a, float(t)) for t in mids])
    L = np.array([dual_integral(eta, alpha, float(t), b) for t in mids])
    base = _tail_seed(functional, 0)
    for theta_r in HARDY_THETAS:
        for theta_l in HARDY_THETAS:
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                h = base * np.power(R, theta_r) * np.power(L, -theta_l / alpha)
            seeds.append(_normalized(functional, np.where(np.isfinite(h), h, 0.0)))
    scores = ratio_batch(functional, np.column_stack(seeds))
    k = int(np.argmax(scores))
    h, value = _ascent(functional, seeds[k], max(budget // 4, 1), [])
    h = _normalized(functional, h)
    saturator = Saturator(
        kind='hardy_i' if alpha <= beta else 'hardy_ii',
        interval=(a, b),
        test_function=TestFunction(tuple(cells), tuple(h)),
        normalization=float(functional.rhs_power(h)),
        ratio=float(functional.ratios(h)),
    )
    return condition, saturator
