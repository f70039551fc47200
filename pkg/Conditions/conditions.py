import logging
import math

import numpy as np
from scipy import optimize

from Core.copson_core import check_admissible, phi_power
from Models.copson_grid import Estimate
from Models.copson_reports import ConditionReport, ConditionValue, Regime
from Quadrature.quadrature import integrate, sup_on_interval
from Weights.weights import (
    conjugate, cumulative_weight, eval_weight, integrate_weight, sigma_tail, xdiv, xmul, xpow, xpow_array,
)
from utils import InvalidInputError, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-8
DEFAULT_DOMAIN_FACTOR = 10.0
# Tolérance relative des intégrales intérieures (imbriquées dans une quadrature extérieure)
INNER_TOL_FACTOR = 1e-2

CONDITION_NAMES = (
    'A1', 'A2', 'A3', 'A4', 'A4*', 'A5', 'A5*', 'A6',
    'A~1', 'A~2', 'A~3', 'A~4', 'A~5',
)

COMBINATIONS = {
    'a': ('A1',),
    'b': ('A2', 'A3'),
    'c': ('A1', 'A4'),
    'd': ('A3', 'A5'),
    'a~': ('A~1',),
    'b~': ('A~2', 'A~3'),
    'c~': ('A~1', 'A~4'),
    'd~': ('A~3', 'A~5'),
}

# Variante étoilée évaluée en parallèle de la condition simple
STARRED = {'A4': 'A4*', 'A5': 'A5*'}


def is_applicable(params, name):
    p, q, m = params.p, params.q, params.m
    rules = {
        'A1': p > 1,
        'A2': p > 1 and q < p,
        'A3': p > 1 and q < p,
        'A4': p > 1 and m < p,
        'A4*': p > 1 and m < p,
        'A5': p > 1 and m < p and q < p,
        'A5*': p > 1 and m < p and q < p,
        'A6': p > 1 and m < p and q < p,
        'A~1': p == 1,
        'A~2': p == 1 and q < 1,
        'A~3': p == 1 and q < 1,
        'A~4': p == 1 and m < 1,
        'A~5': p == 1 and m < 1 and q < 1,
    }
    if name not in rules:
        raise InvalidInputError(f"Condition inconnue: {name}")
    return rules[name]


def classify_regime(params):
    """Cas (a)-(d) selon (p, q, m); p = 1 donne les cas tilde"""
    p, q, m = params.p, params.q, params.m
    if p == 1:
        label = ('a~' if q >= 1 else 'b~') if m >= 1 else ('c~' if q >= 1 else 'd~')
    elif p <= m:
        label = 'a' if q >= p else 'b'
    else:
        label = 'c' if q >= p else 'd'
    applicable = tuple(name for name in CONDITION_NAMES if is_applicable(params, name))
    return Regime(label=label, applicable=applicable, combination=COMBINATIONS[label])


class _Context:
    """Quantités partagées par les conditions sur la fenêtre [t_min, t_max]"""

    def __init__(self, problem, rel_tol):
        self.problem = problem
        self.params = problem.params
        self.p, self.q, self.m = self.params.p, self.params.q, self.params.m
        self.rel_tol = rel_tol
        self.inner_tol = max(rel_tol * INNER_TOL_FACTOR, 1e-12)
        self.grid = problem.grid
        self.t_min, self.t_max = problem.grid.t_min, problem.grid.t_max
        self.breakpoints = problem.breakpoints()
        self.nodes = problem.grid.nodes()
        cells = [integrate_weight(problem.u, a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:])]
        self.u_cumulative = np.concatenate([[0.0], np.cumsum(cells)])
        self._sigma_nodes = None

    # couches élémentaires
    def W(self, t):
        return cumulative_weight(self.problem.w, t)

    def Phi(self, t):
        return phi_power(self.problem, t)

    def U(self, a, b):
        return integrate_weight(self.problem.u, a, b)

    def sigma(self, t):
        return sigma_tail(self.problem.v, self.p, t)

    def dual(self, t):
        return xpow(eval_weight(self.problem.v, t), 1 - conjugate(self.p))

    def u(self, t):
        return eval_weight(self.problem.u, t)

    def w(self, t):
        return eval_weight(self.problem.w, t)

    def v(self, t):
        return eval_weight(self.problem.v, t)

    @property
    def sigma_nodes(self):
        if self._sigma_nodes is None:
            self._sigma_nodes = np.array([self.sigma(t) for t in self.nodes])
        return self._sigma_nodes

    def u_from(self, t, j):
        """U(t, z_j) pour les noeuds z_j d'indice >= j (t dans la cellule j-1)"""
        if not np.all(np.isfinite(self.u_cumulative)):
            return np.array([self.U(t, z) for z in self.nodes[j:]])
        base = self.u_cumulative[j - 1] + self.U(self.nodes[j - 1], t)
        return np.clip(self.u_cumulative[j:] - base, 0.0, None)

    def inner_sup(self, t, a, tail_nodes, c, tail_exact):
        """sup sur z dans (t, t_max] de U(t, z)^a T(z)^c, noeuds puis raffinement borné"""
        j = int(np.searchsorted(self.nodes, t, side='right'))
        if j >= self.nodes.size:
            return 0.0
        j = max(j, 1)
        with np.errstate(invalid='ignore'):
            left = xpow_array(self.u_from(t, j), a)
            right = xpow_array(tail_nodes[j:], c)
            values = np.where((left == 0) | (right == 0), 0.0, left * right)
        if np.any(np.isinf(values)):
            return math.inf
        k = int(np.argmax(values))
        best = float(values[k])
        z = self.nodes[j:]
        lo = math.log(z[k - 1]) if k > 0 else math.log(t)
        hi = math.log(z[min(k + 1, z.size - 1)])
        if hi <= lo:
            return best

        def f(x):
            zz = math.exp(x)
            if not zz > t:
                return 0.0
            return -xmul(xpow(self.U(t, zz), a), xpow(tail_exact(zz), c))

        result = optimize.minimize_scalar(f, bounds=(lo, hi), method='bounded', options={'xatol': 1e-8})
        return max(best, -float(result.fun))

    def inner_integral(self, t, integrand):
        """Intégrale de integrand(t, s) pour s dans (t, t_max)"""
        if not t < self.t_max:
            return 0.0
        try:
            return integrate(lambda s: integrand(t, s), t, self.t_max, self.inner_tol, self.breakpoints).value
        except QuadratureError as e:
            return e.estimate.value if e.estimate is not None else math.inf


def _relative_change(base, wide):
    if base == wide:
        return 0.0
    if math.isinf(wide) or math.isinf(base):
        return math.inf
    return abs(wide - base) / max(abs(base), 1e-300)


def _first_infinite_layer(layers):
    for name, value in layers.items():
        if math.isinf(value):
            return name
    return None


def _sup_condition(ctx, name, layers, combine):
    """Condition de la forme sup_t F(t)"""
    def value(t):
        return combine(layers(t))

    estimate = sup_on_interval(value, ctx.t_min, ctx.t_max, ctx.grid)
    diagnostics = {}
    if math.isinf(estimate.value) and estimate.argmax is not None:
        diagnostics['diverging_layer'] = _first_infinite_layer(layers(estimate.argmax))
        diagnostics['diverging_at'] = estimate.argmax
    return ConditionValue(name=name, value=estimate.value, argmax=estimate.argmax,
                          breakdown={'refinement_gain': estimate.abs_error}, diagnostics=diagnostics)


def _integral_condition(ctx, name, layers, combine, exponent):
    """Condition de la forme (intégrale de F)^exponent avec repérage des couches infinies"""
    node_layers = [layers(float(t)) for t in ctx.nodes]
    node_values = np.array([combine(item) for item in node_layers])
    infinite = np.isinf(node_values)
    diagnostics = {}
    consecutive = np.flatnonzero(infinite[:-1] & infinite[1:])
    if consecutive.size:
        i = int(consecutive[0])
        diagnostics['diverging_layer'] = _first_infinite_layer(node_layers[i])
        diagnostics['diverging_at'] = float(ctx.nodes[i])
        logger.info(f"{name}: infinite on a set of positive measure near t={ctx.nodes[i]:.4g}")
        return ConditionValue(name=name, value=math.inf, argmax=float(ctx.nodes[i]), diagnostics=diagnostics)

    singular = []

    def value(t):
        out = combine(layers(t))
        if math.isinf(out):
            singular.append(t)
            return 0.0
        return out

    if infinite.any():
        diagnostics['removable_singularity'] = [float(t) for t in ctx.nodes[infinite]]
        logger.warning(f"{name}: isolated infinite values treated as removable singularities")
    try:
        total = integrate(value, ctx.t_min, ctx.t_max, ctx.rel_tol, ctx.breakpoints)
    except QuadratureError as e:
        logger.warning(f"{name}: outer quadrature did not reach tolerance, using partial estimate")
        diagnostics['quadrature'] = 'tolerance_not_met'
        total = e.estimate if e.estimate is not None else Estimate(math.inf)
    if singular:
        diagnostics['removable_singularity'] = sorted(set(diagnostics.get('removable_singularity', [])) | set(singular))[:10]
    finite_values = np.where(infinite, -1.0, node_values)
    argmax = float(ctx.nodes[int(np.argmax(finite_values))])
    return ConditionValue(
        name=name,
        value=xpow(total.value, exponent),
        argmax=argmax,
        breakdown={'integral': total.value, 'abs_error': total.abs_error},
        diagnostics=diagnostics,
    )


def _hardy_tail_integrands(ctx):
    """Intégrandes intérieures des conditions (c)/(d) et de leurs variantes étoilées"""
    p, m = ctx.p, ctx.m

    def plain(t, s):
        return xmul(
            xmul(xpow(ctx.U(t, s), p / (p - m)), xpow(ctx.sigma(s), p * (m - 1) / (p - m))),
            ctx.dual(s),
        )

    def starred(t, s):
        return xmul(
            xmul(xpow(ctx.U(t, s), m / (p - m)), ctx.u(s)),
            xpow(ctx.sigma(s), m * (p - 1) / (p - m)),
        )

    return plain, starred


def _tilde_tail(ctx):
    """E(z) = esssup sur y > z de v(y)^{-m/(1-m)}, maximum suffixe sur la grille"""
    exponent = -ctx.m / (1 - ctx.m)
    values = xpow_array(eval_weight(ctx.problem.v, ctx.nodes), exponent)
    suffix = np.maximum.accumulate(values[::-1])[::-1]

    def E(z):
        j = int(np.searchsorted(ctx.nodes, z, side='right'))
        local = xpow(ctx.v(z), exponent)
        return local if j >= suffix.size else max(local, float(suffix[j]))

    return E


def _evaluate(ctx, name):
    p, q, m = ctx.p, ctx.q, ctx.m
    params = ctx.params
    p_prime = conjugate(p)

    if name == 'A1':
        return _sup_condition(
            ctx, name,
            lambda t: {'phi': ctx.Phi(t), 'sigma_tail': ctx.sigma(t)},
            lambda layer: xmul(xpow(layer['phi'], 1 / q), xpow(layer['sigma_tail'], 1 / p_prime)),
        )

    if name in ('A2', 'A3'):
        r = params.r
        a = r / m if name == 'A2' else q / m
        first = 'w_cumulative' if name == 'A2' else 'phi'

        def layers(t):
            return {
                first: ctx.W(t) if name == 'A2' else ctx.Phi(t),
                'w': ctx.w(t),
                'inner_sup': ctx.inner_sup(t, a, ctx.sigma_nodes, r / p_prime, ctx.sigma),
            }

        return _integral_condition(
            ctx, name, layers,
            lambda layer: xmul(xmul(xpow(layer[first], r / p), layer['w']), layer['inner_sup']),
            1 / r,
        )

    if name in ('A4', 'A4*', 'A5', 'A5*'):
        plain, starred = _hardy_tail_integrands(ctx)
        integrand = starred if name.endswith('*') else plain
        if name.startswith('A4'):
            return _sup_condition(
                ctx, name,
                lambda t: {'w_cumulative': ctx.W(t), 'inner_integral': ctx.inner_integral(t, integrand)},
                lambda layer: xmul(xpow(layer['w_cumulative'], 1 / q),
                                   xpow(layer['inner_integral'], (p - m) / (p * m))),
            )
        r = params.r
        return _integral_condition(
            ctx, name,
            lambda t: {'w_cumulative': ctx.W(t), 'w': ctx.w(t),
                       'inner_integral': ctx.inner_integral(t, integrand)},
            lambda layer: xmul(
                xmul(xpow(layer['w_cumulative'], r / p), layer['w']),
                xpow(layer['inner_integral'], q * (p - m) / (m * (p - q))),
            ),
            1 / r,
        )

    if name == 'A6':
        r = params.r
        return _integral_condition(
            ctx, name,
            lambda t: {'phi': ctx.Phi(t), 'sigma_tail': ctx.sigma(t), 'dual_weight': ctx.dual(t)},
            lambda layer: xmul(
                xmul(xpow(layer['phi'], r / q), xpow(layer['sigma_tail'], params.r_over_q_prime)),
                layer['dual_weight'],
            ),
            1 / r,
        )

    return _evaluate_tilde(ctx, name)


def _evaluate_tilde(ctx, name):
    q, m = ctx.q, ctx.m
    q_prime = ctx.params.q_prime
    v_nodes = eval_weight(ctx.problem.v, ctx.nodes)
    diagnostics = {'v_vanishes': bool(np.any(v_nodes == 0))}

    if name == 'A~1':
        value = _sup_condition(
            ctx, name,
            lambda t: {'phi': ctx.Phi(t), 'v': ctx.v(t)},
            lambda layer: xmul(xpow(layer['phi'], 1 / q), xpow(layer['v'], -1.0)),
        )
    elif name in ('A~2', 'A~3'):
        a = -q_prime / m if name == 'A~2' else q / m
        first = 'w_cumulative' if name == 'A~2' else 'phi'
        tail_nodes = xpow_array(v_nodes, q_prime)

        def layers(t):
            return {
                first: ctx.W(t) if name == 'A~2' else ctx.Phi(t),
                'w': ctx.w(t),
                'inner_sup': ctx.inner_sup(t, a, tail_nodes, 1.0, lambda z: xpow(ctx.v(z), q_prime)),
            }

        value = _integral_condition(
            ctx, name, layers,
            lambda layer: xmul(xmul(xpow(layer[first], -q_prime), layer['w']), layer['inner_sup']),
            -1 / q_prime,
        )
    else:
        E = _tilde_tail(ctx)

        def integrand(t, z):
            return xmul(xmul(xpow(ctx.U(t, z), m / (1 - m)), ctx.u(z)), E(z))

        if name == 'A~4':
            value = _sup_condition(
                ctx, name,
                lambda t: {'w_cumulative': ctx.W(t), 'inner_integral': ctx.inner_integral(t, integrand)},
                lambda layer: xmul(xpow(layer['w_cumulative'], 1 / q),
                                   xpow(layer['inner_integral'], (1 - m) / m)),
            )
        else:
            value = _integral_condition(
                ctx, name,
                lambda t: {'w_cumulative': ctx.W(t), 'w': ctx.w(t),
                           'inner_integral': ctx.inner_integral(t, integrand)},
                lambda layer: xmul(
                    xmul(xpow(layer['w_cumulative'], -q_prime), layer['w']),
                    xpow(layer['inner_integral'], -q_prime * (1 - m) / m),
                ),
                -1 / q_prime,
            )
    if diagnostics['v_vanishes']:
        logger.warning(f"{name}: v vanishes on part of the window, 1/v is infinite there")
    return ConditionValue(value.name, value.value, value.argmax, value.breakdown,
                          {**value.diagnostics, **diagnostics})


def eval_condition(problem, name, rel_tol=DEFAULT_REL_TOL, truncation=False, domain_factor=DEFAULT_DOMAIN_FACTOR):
    """Valeur d'une condition A/A~ sur la fenêtre de la grille du problème"""
    if not is_applicable(problem.params, name):
        raise InvalidInputError(
            f"La condition {name} ne s'applique pas à (p={problem.params.p}, q={problem.params.q}, m={problem.params.m})"
        )
    value = _evaluate(_Context(problem, rel_tol), name)
    if not truncation:
        return value
    wide = _evaluate(_Context(problem.with_grid(problem.grid.widened(domain_factor)), rel_tol), name)
    delta = _relative_change(value.value, wide.value)
    if delta > 0.05:
        logger.warning(f"{name}: truncation sensitivity {delta:.3g} when widening the window")
    return ConditionValue(value.name, value.value, value.argmax, value.breakdown, value.diagnostics, delta)


def side_condition_holds(problem, regime_label):
    """Hypothèse sous laquelle variantes simple et étoilée sont équivalentes"""
    params = problem.params
    tail_finite = math.isfinite(sigma_tail(problem.v, params.p, problem.grid.t_min * 1e-6))
    if regime_label == 'c':
        return params.m >= 1 or tail_finite
    if regime_label == 'd':
        return (params.m >= 1 and params.q > 1) or tail_finite
    return False


def theorem_bound(problem, rel_tol=DEFAULT_REL_TOL, truncation=False, domain_factor=DEFAULT_DOMAIN_FACTOR,
                  values=None):
    """Somme des conditions du régime, avec le détail par condition"""
    regime = classify_regime(problem.params)
    values = dict(values or {})
    for name in regime.combination + tuple(STARRED[n] for n in regime.combination if n in STARRED):
        if name not in values:
            values[name] = eval_condition(problem, name, rel_tol, truncation, domain_factor)

    total = 0.0
    for name in regime.combination:
        total += values[name].value
    breakdown = {name: values[name].value for name in values
                 if name in regime.combination or name in STARRED.values()}
    diagnostics = {'regime': regime.label, 'combination': list(regime.combination)}
    for plain, star in STARRED.items():
        if plain in regime.combination:
            diagnostics[f'{plain}_over_{star}'] = xdiv(values[plain].value, values[star].value)
            diagnostics['side_condition'] = side_condition_holds(problem, regime.label)
    deltas = [values[name].truncation_delta for name in regime.combination
              if values[name].truncation_delta is not None]
    logger.info(f"Theorem bound for regime {regime.label}: {total:.6g}")
    return ConditionValue(
        name='+'.join(regime.combination),
        value=total,
        breakdown=breakdown,
        diagnostics=diagnostics,
        truncation_delta=max(deltas) if deltas else None,
    )


def evaluate_all(problem, rel_tol=DEFAULT_REL_TOL, truncation=True, domain_factor=DEFAULT_DOMAIN_FACTOR,
                 probe_factor=10.0, probe_steps=6):
    """Rapport complet: régime, admissibilité, toutes les conditions applicables et la borne"""
    regime = classify_regime(problem.params)
    admissibility = check_admissible(problem, probe_factor, probe_steps)
    if not admissibility.admissible:
        raise InvalidInputError("Paire (u, w) non admissible: phi doit être finie et positive")
    values = {name: eval_condition(problem, name, rel_tol, truncation, domain_factor)
              for name in regime.applicable}
    bound = theorem_bound(problem, rel_tol, truncation, domain_factor, values=values)
    return ConditionReport(
        regime=regime,
        admissibility=admissibility,
        conditions=tuple(values[name] for name in regime.applicable),
        theorem_bound=bound,
    )
