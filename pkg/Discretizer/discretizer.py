import logging
import math

import numpy as np
from scipy import optimize

from Core.copson_core import check_admissible, phi_power
from Models.copson_sequence import DiscretizingSequence, PropertyCheck, VerificationReport
from Quadrature.quadrature import integrate
from Weights.weights import cumulative_weight, eval_weight, integrate_weight, xdiv, xpow
from utils import BracketingError, InvalidInputError, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_ROOT_TOL = 1e-10
MAX_STEPS = 2000
# Dilatation maximale (en ln t) tentée pour encadrer une racine
MAX_BRACKET_LOG = 700.0
COPSON9_SAMPLES = 16


class _Thresholds:
    """W(t) et phi(t)^q avec leurs limites en inf"""

    def __init__(self, problem, phi_at_infinity):
        self.problem = problem
        self.w_infinity = cumulative_weight(problem.w, math.inf)
        self.phi_infinity = phi_at_infinity

    def w(self, t):
        return self.w_infinity if math.isinf(t) else cumulative_weight(self.problem.w, t)

    def phi(self, t):
        return self.phi_infinity if math.isinf(t) else phi_power(self.problem, t)


def _solve(F, target, start, direction, xtol, index):
    """Racine de F(tau) = target en partant de start vers le haut (+1) ou le bas (-1)"""
    def f(x):
        return F(math.exp(x)) / target - 1.0

    x0 = math.log(start)
    step = math.log(2.0)
    other = x0 + direction * step
    while f(other) * direction < 0:
        x0 = other
        step *= 2
        other = x0 + direction * step
        if abs(other) > MAX_BRACKET_LOG:
            raise BracketingError(f"Impossible d'encadrer la racine à l'indice {index}", index)
    lo, hi = sorted((x0, other))
    try:
        root = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (ValueError, RuntimeError, QuadratureError) as e:
        raise BracketingError(f"Recherche de racine échouée à l'indice {index}: {str(e)}", index)
    return math.exp(root)


def _forward_step(th, D, t_prev, xtol, index):
    """Retourne (t_k, étiquette, drapeau éventuel)"""
    target_w = D * th.w(t_prev)
    target_phi = D * th.phi(t_prev)
    tau_w = math.inf if th.w_infinity < target_w else _solve(th.w, target_w, t_prev, 1, xtol, index)
    tau_phi = math.inf if th.phi_infinity < target_phi else _solve(th.phi, target_phi, t_prev, 1, xtol, index)
    if math.isinf(tau_w) and math.isfinite(tau_phi):
        # W borné alors que phi croît sans borne: seul le seuil de phi est atteignable
        return tau_phi, 'K2', 'w_threshold_unreachable'
    if tau_w >= tau_phi:
        return tau_w, 'K1', None
    return tau_phi, 'K2', None


def _upper_start(F, target, t_next, index):
    """Point de départ fini au-dessus de la racine (utile quand t_next = inf)"""
    if math.isfinite(t_next):
        return t_next
    start = 1.0
    while not F(start) > target:
        start *= 10.0
        if start > 1e300:
            raise BracketingError(f"Impossible de quitter la sentinelle à l'indice {index}", index)
    return start


def _backward_step(th, D, t_next, xtol, index):
    """Retourne (t_{k-1}, étiquette du pas t_{k-1} -> t_k)"""
    target_phi = th.phi(t_next) / D
    tau_phi = _solve(th.phi, target_phi, _upper_start(th.phi, target_phi, t_next, index), -1, xtol, index)
    if math.isinf(th.w(t_next)):
        # t_next = inf avec W(inf) = inf: seuil de phi uniquement
        return tau_phi, 'K2'
    target_w = th.w(t_next) / D
    tau_w = _solve(th.w, target_w, _upper_start(th.w, target_w, t_next, index), -1, xtol, index)
    if tau_w <= tau_phi:
        return tau_w, 'K1'
    return tau_phi, 'K2'


def _collapse(t, labels, tol):
    """Fusionne les points consécutifs égaux à tol près; retourne les indices fusionnés"""
    kept_t, kept_labels, collapsed = [t[0]], [labels[0]], []
    for i in range(1, len(t)):
        if math.isfinite(t[i]) and t[i] <= kept_t[-1] * (1 + tol):
            collapsed.append(i)
            continue
        kept_t.append(t[i])
        kept_labels.append(labels[i])
    return kept_t, kept_labels, collapsed


def build_sequence(problem, root_tol=DEFAULT_ROOT_TOL, admissibility=None, probe_factor=10.0, probe_steps=6):
    """Construit la fenêtre de la suite discrétisante sur [t_min, t_max].

    Pas avant: t_k = max des deux seuils (W et phi^q multipliés par D).
    Pas arrière: t_{k-1} = min des deux points de division par D. Quand phi
    est bornée (K = 0) la construction part de la sentinelle inf.
    """
    report = admissibility or check_admissible(problem, probe_factor, probe_steps)
    if not report.admissible:
        raise InvalidInputError(
            f"Paire (u, w) non admissible: phi hors de (0, inf) en {list(report.failures)}"
        )
    flags = []
    top_flag = report.top_flag
    if top_flag is None:
        flags.append('top_flag_inconclusive')
        top_flag = 'inf'

    D = problem.params.doubling
    th = _Thresholds(problem, report.phi_power_at_infinity if top_flag == '0' else math.inf)
    xtol = min(root_tol, 1e-10) * 1e-2
    t_min, t_max = problem.grid.t_min, problem.grid.t_max

    if top_flag == '0':
        points, labels = [math.inf], []
    else:
        points, labels = [problem.anchor], []
        index = 0
        while points[-1] < t_max:
            index += 1
            if index > MAX_STEPS:
                raise BracketingError("Nombre maximal de pas atteint vers la droite", index)
            t_next, label, flag = _forward_step(th, D, points[-1], xtol, index)
            if flag and flag not in flags:
                logger.warning(f"Forward step {index}: {flag}")
                flags.append(flag)
            points.append(t_next)
            labels.append(label)

    index = 0
    while points[0] > t_min:
        index -= 1
        if -index > MAX_STEPS:
            raise BracketingError("Nombre maximal de pas atteint vers la gauche", index)
        t_prev, label = _backward_step(th, D, points[0], xtol, index)
        points.insert(0, t_prev)
        labels.insert(0, label)

    # labels[i] porte sur le pas t[i] -> t[i+1]; on le décale vers t[i+1]
    labels = ['K1'] + labels
    points, labels, collapsed = _collapse(points, labels, max(root_tol, 1e-12))
    if collapsed:
        logger.warning(f"Collapsed {len(collapsed)} equal consecutive points")
        flags.append('collapsed_points')

    logger.info(f"Discretizing sequence: {len(points)} points, top flag {top_flag}")
    return DiscretizingSequence(
        t=tuple(points),
        labels=tuple(labels),
        top_flag=top_flag,
        complete_low=False,
        complete_high=top_flag == '0',
        collapsed=tuple(collapsed),
        flags=tuple(flags),
    )


def _min_check(name, ratios, tol):
    if not ratios:
        return PropertyCheck(name, True, math.inf, -1, vacuous=True)
    index, worst = min(ratios, key=lambda item: item[1])
    return PropertyCheck(name, bool(worst >= 1 - tol), float(worst), index)


def _equality_check(name, ratios, tol):
    if not ratios:
        return PropertyCheck(name, True, 1.0, -1, vacuous=True)
    index, worst = max(ratios, key=lambda item: abs(item[1] - 1))
    return PropertyCheck(name, bool(abs(worst - 1) <= tol), float(worst), index)


def _phi_domination_constant(problem, seq, th, samples):
    """Plus grand rapport phi^q(t) / (majorant à trois termes) pour t dans la cellule"""
    u, w = problem.u, problem.w
    theta = problem.params.theta
    t = seq.t
    worst, worst_index = 0.0, -1
    for i in range(3, len(t)):
        a3, a2, a1, b = t[i - 3], t[i - 2], t[i - 1], t[i]
        first = xpow(integrate_weight(u, a2, a1), theta) * integrate_weight(w, a3, a2)
        middle = integrate(
            lambda s: xpow(integrate_weight(u, s, a1), theta) * eval_weight(w, s),
            a2, a1, 1e-8, problem.breakpoints(),
        ).value
        mass = integrate_weight(w, a2, a1)
        top = b if math.isfinite(b) else a1 * problem.grid.t_max / problem.grid.t_min
        for s in np.geomspace(a1, top, samples):
            rhs = first + middle + xpow(integrate_weight(u, a1, s), theta) * mass
            value = xdiv(th.phi(float(s)), rhs)
            if value > worst:
                worst, worst_index = value, i
    return worst, worst_index


def verify_sequence(problem, seq, root_tol=1e-8, samples=COPSON9_SAMPLES, phi_at_infinity=None):
    """Vérifie les propriétés de croissance et d'égalité de la suite sur chaque paire consécutive"""
    if len(seq) < 2:
        return VerificationReport(checks={}, copson9_constant=0.0, passed=True, vacuous=True,
                                  notes=('fewer than two points',))
    D = problem.params.doubling
    if phi_at_infinity is None and seq.has_sentinel:
        phi_at_infinity = check_admissible(problem).phi_power_at_infinity
    th = _Thresholds(problem, math.inf if phi_at_infinity is None else phi_at_infinity)
    tol = max(root_tol, 1e-9)

    w_growth, w_mass, phi_growth, w_equal, phi_equal = [], [], [], [], []
    for i, (a, b) in enumerate(seq.cells(), start=1):
        Wa, Wb = th.w(a), th.w(b)
        Pa, Pb = th.phi(a), th.phi(b)
        w_growth.append((i, xdiv(Wb, D * Wa)))
        if math.isinf(Wb):
            w_mass.append((i, 1.0))
        else:
            w_mass.append((i, xdiv(D / (D - 1) * (Wb - Wa), Wb)))
        phi_growth.append((i, xdiv(Pb, D * Pa)))
        if seq.labels[i] == 'K1':
            w_equal.append((i, xdiv(Wb, D * Wa)))
        else:
            phi_equal.append((i, xdiv(Pb, D * Pa)))

    checks = {
        'w_growth': _min_check('w_growth', w_growth, tol),
        'w_cell_mass': _min_check('w_cell_mass', w_mass, tol),
        'phi_growth': _min_check('phi_growth', phi_growth, tol),
        'w_equality': _equality_check('w_equality', w_equal, tol),
        'phi_equality': _equality_check('phi_equality', phi_equal, tol),
    }
    constant, index = _phi_domination_constant(problem, seq, th, samples)
    checks['phi_domination'] = PropertyCheck('phi_domination', math.isfinite(constant), constant, index,
                                             vacuous=len(seq) < 4)
    passed = all(check.passed for check in checks.values())
    notes = tuple(f"{name} failed at index {check.worst_index} (ratio {check.worst_ratio:.6g})"
                  for name, check in checks.items() if not check.passed)
    if notes:
        logger.warning(f"Sequence verification failed: {'; '.join(notes)}")
    return VerificationReport(checks=checks, copson9_constant=constant, passed=passed, notes=notes)
