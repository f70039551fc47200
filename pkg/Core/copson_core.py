import logging
import math
from functools import lru_cache

import numpy as np
from scipy import special

from Models.copson_weights import WeightExpr
from Models.copson_reports import AdmissibilityReport
from Quadrature.quadrature import FunctionalGrid, integrate
from Weights.weights import (
    eval_weight, integrate_weight, single_term, term_divergence, xdiv, xpow,
)
from utils import InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_SUB_CELLS = 8
DEFAULT_LEFT_TAIL_DECADES = 8
# Seuils de détection de K
STABLE_RATIO = 1e-6
STABLE_TAIL = 1e-6


def _closed_form_phi_power(u_term, w_term, theta, t):
    """phi^q pour u et w puissances pures, via la fonction bêta incomplète.

    Avec x = (s/t)^{a+1}, l'intégrale devient B_x((b+1)/(a+1), theta+1).
    Retourne None quand la forme close ne s'applique pas.
    """
    if u_term is None or not u_term.is_pure_power or not w_term.is_pure_power:
        return None
    if math.isinf(t) or u_term.support[0] != 0 or u_term.support[1] < t:
        return None
    a = u_term.power
    b = w_term.power
    if a <= -1:
        return None
    lo = w_term.support[0]
    hi = min(w_term.support[1], t)
    if not hi > lo:
        return 0.0
    P = (b + 1) / (a + 1)
    Q = theta + 1
    if P <= 0:
        return math.inf if lo == 0 else None
    x0 = (lo / t) ** (a + 1)
    x1 = (hi / t) ** (a + 1)
    if x0 > 0.5:
        fraction = special.betaincc(P, Q, x0) - special.betaincc(P, Q, x1)
    else:
        fraction = special.betainc(P, Q, x1) - special.betainc(P, Q, x0)
    if fraction <= 0:
        return 0.0
    log_prefactor = (
        theta * math.log(u_term.coef / (a + 1))
        + math.log(w_term.coef)
        + ((a + 1) * theta + b + 1) * math.log(t)
        - math.log(a + 1)
        + special.betaln(P, Q)
    )
    try:
        return math.exp(log_prefactor) * fraction
    except OverflowError:
        return math.inf


def _quadrature_phi_power(problem, w_term, t, rel_tol):
    theta = problem.params.theta
    lo = w_term.support[0]
    hi = min(w_term.support[1], t)
    if not hi > lo:
        return 0.0
    if lo == 0 and term_divergence(w_term, 0.0, hi) == 'zero':
        return math.inf
    if math.isinf(t) and math.isinf(integrate_weight(problem.u, 1.0, math.inf, rel_tol)):
        return math.inf

    single = WeightExpr((w_term,))

    def integrand(s):
        inner = integrate_weight(problem.u, s, t, rel_tol)
        return xpow(inner, theta) * eval_weight(single, s)

    breakpoints = problem.breakpoints()
    return integrate(integrand, lo, hi, max(rel_tol, 1e-9), breakpoints).value


@lru_cache(maxsize=200_000)
def phi_power(problem, t, rel_tol=1e-10):
    """phi(t)^q = intégrale sur (0, t) de (intégrale de u sur (s, t))^{q/m} w(s) ds"""
    if not t > 0:
        raise InvalidInputError("phi n'est défini que pour t > 0")
    if problem.u.is_zero or problem.w.is_zero:
        return 0.0
    theta = problem.params.theta
    u_term = single_term(problem.u)
    total = 0.0
    for w_term in problem.w.active_terms:
        value = _closed_form_phi_power(u_term, w_term, theta, t)
        if value is None:
            value = _quadrature_phi_power(problem, w_term, t, rel_tol)
        total += value
        if math.isinf(total):
            return math.inf
    return total


def phi(problem, t, rel_tol=1e-10):
    return xpow(phi_power(problem, t, rel_tol), 1.0 / problem.params.q)


def phi_power_at_infinity(problem, rel_tol=1e-10):
    """phi(inf)^q; exact quand u et w sont à support borné"""
    end = max(problem.u.support_end, problem.w.support_end)
    if end < math.inf:
        return phi_power(problem, end, rel_tol)
    return phi_power(problem, math.inf, rel_tol)


def _detect_top_flag(problem, probe_factor, probe_steps):
    """K = 0 si phi se stabilise au-delà de t_max, K = inf si elle croît; None si indécis"""
    end = max(problem.u.support_end, problem.w.support_end)
    if end < math.inf:
        value = phi_power(problem, end)
        return ('0' if math.isfinite(value) else 'inf'), value, ((end, value),)

    t_max = problem.grid.t_max
    probes = tuple((t_max * probe_factor ** j, phi_power(problem, t_max * probe_factor ** j))
                   for j in range(probe_steps + 1))
    values = [value for _, value in probes]
    if any(math.isinf(value) for value in values):
        return 'inf', math.inf, probes
    last, previous = values[-1], values[-2]
    if last <= previous * (1 + STABLE_RATIO):
        try:
            at_infinity = phi_power(problem, math.inf)
        except Exception as e:
            logger.warning(f"phi(inf) by quadrature failed, using last probe: {str(e)}")
            at_infinity = last
        return '0', at_infinity, probes
    increments = np.diff(values)
    if increments[-1] >= increments[-2] * (1 - 1e-9):
        return 'inf', math.inf, probes
    rho = increments[-1] / increments[-2]
    remaining = increments[-1] * rho / (1 - rho)
    if remaining <= STABLE_TAIL * last:
        return '0', last + remaining, probes
    return None, None, probes


def check_admissible(problem, probe_factor=10.0, probe_steps=6):
    """Échantillonne phi sur la grille: 0 < phi < inf, monotonie, limite en 0 et drapeau K"""
    nodes = problem.grid.nodes()
    values = np.array([phi_power(problem, t) for t in nodes])
    bad = [float(t) for t, value in zip(nodes, values) if not (0 < value < math.inf)]
    admissible = not bad
    finite = values[np.isfinite(values)]
    monotone = bool(np.all(np.diff(finite) >= -1e-12 * np.abs(finite[1:]))) if finite.size > 1 else True

    below = problem.grid.t_min / probe_factor ** probe_steps
    near_zero = phi_power(problem, below)
    vanishes = bool(near_zero <= 0.5 * values[0] or near_zero <= 1e-300) if values[0] > 0 else False

    top_flag, at_infinity, probes = None, None, ()
    if admissible:
        top_flag, at_infinity, probes = _detect_top_flag(problem, probe_factor, probe_steps)
        if top_flag is None:
            logger.warning("K detection inconclusive: phi still grows slowly beyond t_max")
    else:
        logger.warning(f"Inadmissible pair: phi not in (0, inf) at {len(bad)} grid nodes")

    return AdmissibilityReport(
        admissible=admissible,
        top_flag=top_flag,
        phi_power_at_infinity=at_infinity,
        vanishes_at_zero=vanishes,
        monotone=monotone,
        inconclusive=admissible and top_flag is None,
        failures=tuple(bad[:10]),
        probes=tuple(probes),
    )


class ProblemFunctional:
    """Membres gauche et droit pour des fonctions test constantes par morceaux.

    La queue H(s) est exacte; les deux couches extérieures sont intégrées par
    trapèzes sur les noeuds fins de FunctionalGrid.
    """

    def __init__(self, problem, sub_cells=DEFAULT_SUB_CELLS, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES):
        self.problem = problem
        params = problem.params
        self.p, self.q, self.m = params.p, params.q, params.m
        self.theta = params.theta
        self.cells = problem.grid.nodes()
        self.grid = FunctionalGrid(
            self.cells,
            breakpoints=problem.breakpoints(),
            sub_cells=sub_cells,
            left_tail_decades=left_tail_decades,
            avoid=(1.0,),
        )
        self.u_fine = eval_weight(problem.u, self.grid.fine)
        self.w_fine = eval_weight(problem.w, self.grid.fine)
        self.masses = np.array([
            integrate_weight(problem.v, a, b) for a, b in zip(self.cells[:-1], self.cells[1:])
        ])

    @property
    def size(self):
        return self.cells.size - 1

    @property
    def columns(self):
        return self.grid.columns

    def lhs_from_tails(self, tails):
        tails = np.asarray(tails, dtype=float)
        u = self.u_fine if tails.ndim == 1 else self.u_fine[:, None]
        w = self.w_fine if tails.ndim == 1 else self.w_fine[:, None]
        with np.errstate(over='ignore', invalid='ignore'):
            inner = self.grid.reverse_cumulative(np.power(tails, self.m) * u)
            outer = self.grid.integrate(np.power(inner, self.theta) * w)
            return np.power(outer, 1.0 / self.q)

    def lhs(self, values):
        return self.lhs_from_tails(self.grid.tails(values))

    def rhs_power(self, values):
        values = np.asarray(values, dtype=float)
        masses = self.masses if values.ndim == 1 else self.masses[:, None]
        with np.errstate(invalid='ignore', over='ignore'):
            terms = np.where(values > 0, np.power(values, self.p) * masses, 0.0)
        return np.sum(terms, axis=0)

    def rhs(self, values):
        return np.power(self.rhs_power(values), 1.0 / self.p)

    def ratios(self, values):
        """Rapports lhs/rhs, 0/0 = 0; accepte (N,) ou (N, K)"""
        lhs = np.atleast_1d(self.lhs(values))
        rhs = np.atleast_1d(self.rhs(values))
        out = np.array([xdiv(float(a), float(b)) for a, b in zip(lhs, rhs)])
        return out if np.ndim(values) > 1 else float(out[0])


@lru_cache(maxsize=32)
def problem_functional(problem, sub_cells=DEFAULT_SUB_CELLS, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES):
    return ProblemFunctional(problem, sub_cells, left_tail_decades)


def _check_test_function(problem, h):
    nodes = problem.grid.nodes()
    if len(h.nodes) != len(nodes) or not np.allclose(h.nodes, nodes, rtol=1e-12):
        raise InvalidInputError("La fonction test doit être définie sur la grille du problème")


def lhs_norm(problem, h, sub_cells=DEFAULT_SUB_CELLS, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES):
    _check_test_function(problem, h)
    if h.is_zero:
        return 0.0
    return float(problem_functional(problem, sub_cells, left_tail_decades).lhs(h.array))


def rhs_norm(problem, h, sub_cells=DEFAULT_SUB_CELLS, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES):
    _check_test_function(problem, h)
    if h.is_zero:
        return 0.0
    return float(problem_functional(problem, sub_cells, left_tail_decades).rhs(h.array))


def ratio(problem, h, sub_cells=DEFAULT_SUB_CELLS, left_tail_decades=DEFAULT_LEFT_TAIL_DECADES):
    """lhs_norm / rhs_norm avec 0/0 = 0"""
    return xdiv(lhs_norm(problem, h, sub_cells, left_tail_decades),
                rhs_norm(problem, h, sub_cells, left_tail_decades))