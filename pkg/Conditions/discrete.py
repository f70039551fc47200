import logging
import math

import numpy as np

from Core.copson_core import phi_power
from Models.copson_reports import DiscreteConditionValue, GrowthReport, HolderReport
from Quadrature.quadrature import integrate, sup_on_interval
from Weights.weights import conjugate, dual_integral, eval_weight, xdiv, xmul, xpow
from utils import InvalidInputError, QuadratureError

logger = logging.getLogger(__name__)

DISCRETE_NAMES = ('D1', 'D2', 'D3', 'D4')
GROWTH_SLACK = 1e-12


def is_discrete_applicable(params, name):
    p, q, m = params.p, params.q, params.m
    if p == 1:
        return False
    rules = {
        'D1': True,
        'D2': q < p,
        'D3': m < p,
        'D4': m < p and q < p,
    }
    if name not in rules:
        raise InvalidInputError(f"Condition discrète inconnue: {name}")
    return rules[name]


def _cell_sup(problem, a, b, exponent_phi, exponent_tail):
    """sup sur t dans [a, b] de phi(t)^{q·exponent_phi} (intégrale de v^{1-p'} sur (t, b))^exponent_tail"""
    p = problem.params.p

    def f(t):
        return xmul(xpow(phi_power(problem, t), exponent_phi), xpow(dual_integral(problem.v, p, t, b), exponent_tail))

    return sup_on_interval(f, a, b, problem.grid).value


def _cell_integral(problem, a, b):
    """Intégrale sur [a, b] de phi^{mp/(p-m)} (intégrale de v^{1-p'} sur (t, b))^{p(m-1)/(p-m)} v^{1-p'}"""
    p, q, m = problem.params.p, problem.params.q, problem.params.m
    dual = 1 - conjugate(p)

    def f(t):
        return xmul(
            xmul(xpow(phi_power(problem, t), m * p / (q * (p - m))),
                 xpow(dual_integral(problem.v, p, t, b), p * (m - 1) / (p - m))),
            xpow(eval_weight(problem.v, t), dual),
        )

    try:
        return integrate(f, a, b, 1e-8, problem.breakpoints()).value
    except QuadratureError as e:
        logger.warning(f"Cell integral on [{a:.4g}, {b:.4g}] below tolerance, using partial estimate")
        return e.estimate.value if e.estimate is not None else math.inf


def _contributions(problem, seq, name):
    p, q = problem.params.p, problem.params.q
    p_prime = conjugate(p)
    r = problem.params.r
    out = []
    for a, b in seq.cells():
        if name == 'D1':
            out.append(_cell_sup(problem, a, b, 1 / q, 1 / p_prime))
        elif name == 'D2':
            out.append(_cell_sup(problem, a, b, r / q, r / p_prime))
        else:
            out.append(_cell_integral(problem, a, b))
    return np.array(out, dtype=float)


def _combine(problem, name, contributions):
    p, q, m = problem.params.p, problem.params.q, problem.params.m
    if contributions.size == 0:
        return 0.0
    if name == 'D1':
        return float(np.max(contributions))
    r = problem.params.r
    if name == 'D2':
        return xpow(float(np.sum(contributions)), 1 / r)
    if name == 'D3':
        return xpow(float(np.max(contributions)), (p - m) / (m * p))
    powered = np.array([xpow(c, q * (p - m) / (m * (p - q))) for c in contributions])
    return xpow(float(np.sum(powered)), 1 / r)


def eval_D(problem, seq, name, sensitivity_seq=None):
    """Condition discrète sur la fenêtre de la suite (somme ou sup des contributions par cellule)"""
    if not is_discrete_applicable(problem.params, name):
        raise InvalidInputError(
            f"{name} ne s'applique pas à (p={problem.params.p}, q={problem.params.q}, m={problem.params.m})"
        )
    contributions = _contributions(problem, seq, name)
    value = _combine(problem, name, contributions)
    delta = None
    if sensitivity_seq is not None:
        wide = _combine(problem, name, _contributions(problem, sensitivity_seq, name))
        delta = 0.0 if wide == value else (
            math.inf if math.isinf(wide) or math.isinf(value) else abs(wide - value) / max(value, 1e-300)
        )
    diagnostics = {}
    if contributions.size:
        diagnostics['dominant_cell'] = int(np.argmax(contributions))
    if not (seq.complete_low and seq.complete_high):
        diagnostics['truncated'] = True
    return DiscreteConditionValue(
        name=name,
        value=value,
        contributions=tuple(float(c) for c in contributions),
        complete_low=seq.complete_low,
        complete_high=seq.complete_high,
        truncation_delta=delta,
        diagnostics=diagnostics,
    )


def a1_over_d1(a1_value, d1_value):
    """Rapport empirique A1/D1 (A1 est dominée par D1 à constante près)"""
    return xdiv(a1_value, d1_value)


def _as_sequences(a_seq, b_seq):
    a = np.asarray(a_seq, dtype=float)
    b = np.asarray(b_seq, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"Les suites doivent avoir la même longueur ({a.size} != {b.size})")
    if np.any(a < 0) or np.any(b < 0) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise InvalidInputError("Les suites doivent être finies et positives")
    return a, b


def check_discrete_holder(a_seq, b_seq, p, q):
    """Inégalité de Hölder discrète (forme puissance q) et suite saturante"""
    if not 0 < q < p < math.inf:
        raise InvalidInputError(f"Il faut 0 < q < p < inf (reçu p={p}, q={q})")
    a, b = _as_sequences(a_seq, b_seq)
    lhs = float(np.sum(np.power(a, q) * b))
    S = float(np.sum(np.power(b, p / (p - q))))
    rhs = float(np.sum(np.power(a, p))) ** (q / p) * S ** ((p - q) / p)
    if S > 0:
        c = np.power(b, 1 / (p - q)) / S ** (1 / p)
    else:
        c = np.zeros_like(b)
    saturated = float(np.sum(np.power(c, q) * b))
    target = S ** ((p - q) / p)
    error = abs(saturated - target) / target if target > 0 else abs(saturated)
    return HolderReport(
        lhs=lhs,
        rhs=rhs,
        holds=bool(lhs <= rhs * (1 + 1e-12) + 1e-300),
        saturator=tuple(float(x) for x in c),
        saturated_lhs=saturated,
        saturation_error=error,
    )


def check_geom_growth(b_seq, c_seq, alpha, D):
    """Les trois paires (membre gauche, membre droit) de la sommation à croissance géométrique"""
    if not D > 1:
        raise InvalidInputError(f"D > 1 est requis (reçu {D})")
    if not alpha > 0:
        raise InvalidInputError(f"alpha > 0 est requis (reçu {alpha})")
    b, c = _as_sequences(b_seq, c_seq)
    for k in range(b.size - 1):
        if b[k + 1] < D * b[k] * (1 - GROWTH_SLACK):
            raise InvalidInputError(f"Croissance géométrique violée à l'indice {k}: b[{k + 1}] < D·b[{k}]")

    tail_sums = np.cumsum(c[::-1])[::-1]
    tail_sups = np.maximum.accumulate(c[::-1])[::-1]
    rhs_sum = float(np.sum(np.power(c, alpha) * b))
    pairs = {
        'tail_sum': (float(np.sum(np.power(tail_sums, alpha) * b)), rhs_sum),
        'tail_sup': (float(np.sum(np.power(tail_sups, alpha) * b)), rhs_sum),
        'sup': (float(np.max(np.power(tail_sums, alpha) * b, initial=0.0)),
                float(np.max(np.power(c, alpha) * b, initial=0.0))),
    }
    c_emp = max((xdiv(lhs, rhs) for lhs, rhs in pairs.values()), default=0.0)
    return GrowthReport(pairs=pairs, c_emp=c_emp, finite=math.isfinite(c_emp))


# Combinaison des conditions discrètes par régime (le cas p = 1 n'en a pas)
DISCRETE_COMBINATIONS = {
    'a': ('D1',),
    'b': ('D2',),
    'c': ('D1', 'D3'),
    'd': ('D1', 'D4'),
}


def discrete_bound(problem, seq, regime_label):
    """Somme des conditions discrètes du régime; retourne (valeur, détail)"""
    if regime_label not in DISCRETE_COMBINATIONS:
        raise InvalidInputError(f"Pas de conditions discrètes pour le régime {regime_label}")
    values = {name: eval_D(problem, seq, name) for name in DISCRETE_COMBINATIONS[regime_label]}
    total = 0.0
    for value in values.values():
        total += value.value
    return total, values
