import logging
import math
from functools import lru_cache

import numpy as np

from Models.copson_weights import WeightExpr
from Quadrature.quadrature import integrate
from utils import InvalidInputError, validate_interval

logger = logging.getLogger(__name__)

# Degré maximal des primitives exactes t^a |ln t|^k
MAX_LOG_DEGREE = 12


# Conventions 0·inf = 0, 0/0 = 0, a^0 = 1
def xmul(a, b):
    if a == 0 or b == 0:
        return 0.0
    return a * b


def xdiv(a, b):
    if a == 0:
        return 0.0
    if b == 0:
        return math.inf
    if math.isinf(a) and math.isinf(b):
        return math.inf
    return a / b


def xpow(a, exponent):
    if exponent == 0:
        return 1.0
    if a == 0:
        return 0.0 if exponent > 0 else math.inf
    if math.isinf(a):
        return math.inf if exponent > 0 else 0.0
    try:
        return a ** exponent
    except OverflowError:
        return math.inf


def xpow_array(values, exponent):
    values = np.asarray(values, dtype=float)
    if exponent == 0:
        return np.ones_like(values)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        out = np.power(values, exponent)
    if exponent < 0:
        out = np.where(values == 0, np.inf, out)
        out = np.where(np.isinf(values), 0.0, out)
    return out


def conjugate(p):
    """Exposant conjugué p' = p/(p-1) (inf pour p = 1, négatif pour p < 1)"""
    if p == 1:
        return math.inf
    return p / (p - 1)


def dual_exponent(p):
    """1 - p' = -1/(p-1)"""
    if p <= 1:
        raise InvalidInputError(f"Le poids dual exige p > 1 (reçu p={p})")
    return -1.0 / (p - 1)


def _term_values(term, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    if term.is_zero:
        return out
    a, b = term.support
    inside = (t > a) & (t <= b)
    if not inside.any():
        return out
    ti = t[inside]
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        log_value = math.log(term.coef) + term.power * np.log(ti) + term.exp_rate * ti
        if term.log_power != 0:
            log_value = log_value + term.log_power * np.log(np.abs(np.log(ti)))
        out[inside] = np.exp(log_value)
    return out


def eval_weight(w, t):
    """Valeur ponctuelle du poids (scalaire ou tableau numpy de t > 0)"""
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~(t_arr > 0)):
        raise InvalidInputError("Le poids n'est évalué qu'en t > 0")
    total = np.zeros_like(t_arr)
    for term in w.active_terms:
        total = total + _term_values(term, t_arr)
    return float(total[0]) if scalar else total


def eval_dual_weight(v, p, t):
    """v(t)^{1-p'} avec 0^{1-p'} = inf"""
    exponent = dual_exponent(p)
    if np.ndim(t) == 0:
        return xpow(eval_weight(v, t), exponent)
    return xpow_array(eval_weight(v, t), exponent)


# Critères de divergence par exposants dominants
def diverges_at_zero(power, log_power):
    return power < -1 or (power == -1 and log_power >= -1)


def diverges_at_infinity(power, log_power, exp_rate):
    if exp_rate != 0:
        return exp_rate > 0
    return power > -1 or (power == -1 and log_power >= -1)


def diverges_at_one(log_power):
    return log_power <= -1


def term_divergence(term, lo, hi):
    """Raison de divergence de l'intégrale du terme sur (lo, hi), None si finie"""
    if term.is_zero or not hi > lo:
        return None
    if lo == 0 and diverges_at_zero(term.power, term.log_power):
        return 'zero'
    if math.isinf(hi) and diverges_at_infinity(term.power, term.log_power, term.exp_rate):
        return 'infinity'
    if term.log_power != 0 and lo <= 1 <= hi and diverges_at_one(term.log_power):
        return 'one'
    return None


def _power_log_primitive(alpha, k, t):
    """Primitive de t^alpha (ln t)^k (k entier >= 0), limites 0 et inf comprises"""
    if t == 0 or math.isinf(t):
        # Les cas divergents sont écartés en amont
        return 0.0
    log_t = math.log(t)
    if alpha == -1:
        return log_t ** (k + 1) / (k + 1)
    s = alpha + 1
    total = 0.0
    falling = 1.0
    for j in range(k + 1):
        total += (-1) ** j * falling * log_t ** (k - j) / s ** (j + 1)
        falling *= (k - j)
    try:
        return math.exp(s * log_t) * total
    except OverflowError:
        return math.inf if total > 0 else -math.inf


def _pure_power_integral(term, lo, hi):
    s = term.power + 1
    if s == 0:
        return term.coef * (math.log(hi) - math.log(lo))
    if lo == 0:
        return term.coef * xpow(hi, s) / s
    if math.isinf(hi):
        return -term.coef * lo ** s / s
    try:
        return term.coef * lo ** s * math.expm1(s * math.log(hi / lo)) / s
    except OverflowError:
        return math.inf


def _exponential_integral(term, lo, hi):
    gamma = term.exp_rate
    if math.isinf(hi):
        return -term.coef * math.exp(gamma * lo) / gamma
    try:
        return term.coef * math.exp(gamma * lo) * math.expm1(gamma * (hi - lo)) / gamma
    except OverflowError:
        return math.inf


def _power_log_integral(term, lo, hi):
    k = int(term.log_power)
    alpha = term.power
    total = 0.0
    # |ln t|^k = (-1)^k (ln t)^k sur (0, 1]
    if lo < 1:
        top = min(hi, 1.0)
        total += (-1) ** k * (_power_log_primitive(alpha, k, top) - _power_log_primitive(alpha, k, lo))
    if hi > 1:
        bottom = max(lo, 1.0)
        total += _power_log_primitive(alpha, k, hi) - _power_log_primitive(alpha, k, bottom)
    return term.coef * max(total, 0.0)


def _closed_form_kind(term):
    if term.exp_rate == 0 and term.log_power == 0:
        return 'power'
    if term.power == 0 and term.log_power == 0:
        return 'exponential'
    if term.exp_rate == 0 and term.log_power > 0 and term.log_power == int(term.log_power) \
            and term.log_power <= MAX_LOG_DEGREE:
        return 'power_log'
    return None


@lru_cache(maxsize=200_000)
def integrate_term(term, a, b, rel_tol=1e-10):
    """Intégrale d'un terme sur (a, b) ∩ support; retourne (valeur, erreur absolue)"""
    lo = max(a, term.support[0])
    hi = min(b, term.support[1])
    if term.is_zero or not hi > lo:
        return 0.0, 0.0
    if term_divergence(term, lo, hi) is not None:
        return math.inf, 0.0
    kind = _closed_form_kind(term)
    if kind == 'power':
        return _pure_power_integral(term, lo, hi), 0.0
    if kind == 'exponential':
        return _exponential_integral(term, lo, hi), 0.0
    if kind == 'power_log':
        return _power_log_integral(term, lo, hi), 0.0

    breakpoints = []
    if term.log_power != 0:
        breakpoints.append(1.0)
    if term.exp_rate < 0 and term.power > -1:
        # Sommet de t^{power+1} e^{exp_rate t}
        breakpoints.append((term.power + 1) / -term.exp_rate)
    estimate = integrate(lambda t: float(_term_values(term, t)[0]), lo, hi, rel_tol, breakpoints)
    return estimate.value, estimate.abs_error


def integrate_weight(w, a, b, rel_tol=1e-10):
    """Intégrale de w sur (a, b), +inf si la divergence est certifiée"""
    if 0 <= a and b <= a:
        return 0.0
    a, b = validate_interval(a, b)
    total = 0.0
    for term in w.active_terms:
        value, _ = integrate_term(term, a, b, rel_tol)
        total += value
        if math.isinf(total):
            return math.inf
    return total


def cumulative_weight(w, t, rel_tol=1e-10):
    """W(t) = intégrale de w sur (0, t)"""
    return integrate_weight(w, 0.0, t, rel_tol)


def _stretches(v, a, b):
    """Découpe (a, b) aux extrémités des supports; chaque morceau a un ensemble de termes actifs fixe"""
    points = {a, b}
    for term in v.active_terms:
        for end in term.support:
            if a < end < b:
                points.add(end)
    points = sorted(points)
    for lo, hi in zip(points[:-1], points[1:]):
        active = tuple(term for term in v.active_terms if term.support[0] <= lo and term.support[1] >= hi)
        yield lo, hi, active


def dominant_term(terms, at):
    """Terme qui domine la somme au voisinage de 0, 1 ou inf"""
    terms = [term for term in terms if not term.is_zero]
    if not terms:
        return None
    if at == 0:
        return min(terms, key=lambda term: (term.power, -term.log_power))
    if at == 1:
        return min(terms, key=lambda term: term.log_power)
    if math.isinf(at):
        return max(terms, key=lambda term: (term.exp_rate, term.power, term.log_power))
    raise InvalidInputError("dominant_term n'est défini qu'en 0, 1 ou inf")


def _sum_power_divergence(terms, exponent, lo, hi):
    """Divergence de l'intégrale de (somme des termes)^exponent sur (lo, hi)"""
    if lo == 0:
        dom = dominant_term(terms, 0)
        if diverges_at_zero(dom.power * exponent, dom.log_power * exponent):
            return 'zero'
    if math.isinf(hi):
        dom = dominant_term(terms, math.inf)
        if diverges_at_infinity(dom.power * exponent, dom.log_power * exponent, dom.exp_rate * exponent):
            return 'infinity'
    if lo <= 1 <= hi and all(term.log_power > 0 for term in terms):
        dom = dominant_term(terms, 1)
        if exponent < 0 and diverges_at_one(dom.log_power * exponent):
            return 'one'
    return None


def dual_integral(v, p, a, b, rel_tol=1e-10):
    """Intégrale de v^{1-p'} sur (a, b).

    Sur chaque morceau où un seul terme est actif, le terme est transformé
    (exposants multipliés par 1-p') et intégré exactement si possible. Un
    morceau où v est nul donne +inf (convention 0^{1-p'} = inf).
    """
    exponent = dual_exponent(p)
    if 0 <= a and b <= a:
        return 0.0
    a, b = validate_interval(a, b)
    total = 0.0
    for lo, hi, active in _stretches(v, a, b):
        if not active:
            return math.inf
        if len(active) == 1:
            value, _ = integrate_term(active[0].raised(exponent), lo, hi, rel_tol)
        else:
            if _sum_power_divergence(active, exponent, lo, hi) is not None:
                return math.inf
            stretch = WeightExpr(active)
            breakpoints = (1.0,) if stretch.has_log_terms else ()
            value = integrate(lambda t: xpow(eval_weight(stretch, t), exponent), lo, hi, rel_tol, breakpoints).value
        total += value
        if math.isinf(total):
            return math.inf
    return total


def sigma_tail(v, p, t, rel_tol=1e-10):
    """sigma(t) = intégrale de v^{1-p'} sur (t, inf)"""
    if not t > 0:
        raise InvalidInputError("sigma_tail exige t > 0")
    return dual_integral(v, p, t, math.inf, rel_tol)


def integrability(w, a, b):
    """Analyse symbolique de l'intégrale de w sur (a, b): ('finite'|'infinite', raison)"""
    a, b = validate_interval(a, b)
    for term in w.active_terms:
        lo = max(a, term.support[0])
        hi = min(b, term.support[1])
        reason = term_divergence(term, lo, hi)
        if reason is not None:
            return 'infinite', reason
    return 'finite', None


def single_term(w):
    """Le terme unique de w s'il n'y en a qu'un, None sinon"""
    active = w.active_terms
    return active[0] if len(active) == 1 else None
