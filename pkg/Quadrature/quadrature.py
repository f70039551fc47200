import logging
import math

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from Models.copson_grid import Estimate
from utils import QuadratureError, validate_interval

logger = logging.getLogger(__name__)

QUAD_LIMIT = 200
MIN_SCAN_NODES = 9
# Décalage relatif des points de rupture (discontinuités des supports)
BREAK_OFFSET = 1e-9


def _log_integrand(f):
    """g(x) = f(e^x) e^x, nul aux bords numériques 0 et inf"""
    def g(x):
        if x > 709.0 or x < -745.0:
            return 0.0
        t = math.exp(x)
        value = f(t)
        if value == 0.0:
            return 0.0
        return value * t
    return g


def integrate(f, a, b, rel_tol=1e-8, breakpoints=(), limit=QUAD_LIMIT):
    """Intégrale de f sur (a, b) dans la variable x = ln t.

    L'intervalle est découpé aux points de rupture fournis (et en t = 1 si
    les deux bornes sont impropres) puis chaque morceau passe par
    scipy.integrate.quad. Lève QuadratureError avec l'estimation partielle si
    la tolérance n'est pas atteinte.
    """
    a, b = validate_interval(a, b)
    xa = -math.inf if a == 0 else math.log(a)
    xb = math.inf if math.isinf(b) else math.log(b)
    cuts = sorted({math.log(point) for point in breakpoints if a < point < b})
    if math.isinf(xa) and math.isinf(xb) and not cuts:
        cuts = [0.0]
    edges = [xa] + cuts + [xb]

    g = _log_integrand(f)
    total = 0.0
    error = 0.0
    messages = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if not hi > lo:
            continue
        out = sp_integrate.quad(g, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=limit, full_output=1)
        total += out[0]
        error += out[1]
        if len(out) > 3:
            messages.append(out[3])

    if math.isnan(total):
        raise QuadratureError("Intégrande non défini (NaN) pendant la quadrature", Estimate(math.inf, 0.0))
    if math.isinf(total):
        return Estimate(math.inf, 0.0)
    if messages and error > 10 * rel_tol * abs(total) + 1e-300:
        estimate = Estimate(total, error)
        logger.warning(f"Quadrature tolerance not met on ({a}, {b}): {messages[0].splitlines()[0]}")
        raise QuadratureError(f"Tolérance {rel_tol} non atteinte (erreur estimée {error:.3e})", estimate)
    return Estimate(total, error)


def _safe(value):
    value = float(value)
    return 0.0 if math.isnan(value) else value


def sup_on_interval(f, a, b, grid, xatol=1e-10):
    """Supremum de f sur (a, b): balayage de la grille puis raffinement local.

    Le raffinement utilise la méthode bornée de Brent (section dorée et pas
    paraboliques) entre les deux voisins du meilleur noeud.
    """
    a, b = validate_interval(a, b)
    window = grid.restricted(a, b)
    lo, hi = window.t_min, window.t_max
    if window.size >= MIN_SCAN_NODES:
        nodes = window.nodes()
    else:
        nodes = np.geomspace(lo, hi, MIN_SCAN_NODES)
    if b < math.inf:
        nodes = nodes[nodes <= b]

    values = np.array([_safe(f(t)) for t in nodes])
    infinite = np.flatnonzero(np.isinf(values))
    if infinite.size:
        return Estimate(math.inf, 0.0, argmax=float(nodes[infinite[0]]))

    i = int(np.argmax(values))
    best = float(values[i])
    argmax = float(nodes[i])
    left = math.log(nodes[max(i - 1, 0)])
    right = math.log(nodes[min(i + 1, len(nodes) - 1)])
    if right > left:
        result = optimize.minimize_scalar(
            lambda x: -_safe(f(math.exp(x))),
            bounds=(left, right),
            method='bounded',
            options={'xatol': xatol},
        )
        refined = -float(result.fun)
        if math.isinf(refined):
            return Estimate(math.inf, 0.0, argmax=math.exp(result.x))
        if refined > best:
            return Estimate(refined, refined - float(values[i]), argmax=math.exp(result.x))
    return Estimate(best, 0.0, argmax=argmax)


class FunctionalGrid:
    """Noeuds fins pour les fonctionnelles d'une fonction constante par morceaux.

    `cells` sont les bornes des cellules (N+1 valeurs croissantes). Chaque
    cellule est subdivisée en `sub_cells` morceaux log-uniformes; une queue
    gauche de `left_tail_decades` décades est ajoutée sous cells[0] (h y est
    nul mais les couches extérieures non). Les points de rupture des poids
    sont encadrés à ±BREAK_OFFSET relatif.
    """

    def __init__(self, cells, breakpoints=(), sub_cells=8, left_tail_decades=0,
                 tail_points_per_decade=8, avoid=()):
        cells = np.asarray(cells, dtype=float)
        if cells.ndim != 1 or cells.size < 2 or np.any(np.diff(cells) <= 0):
            raise ValueError("Les bornes de cellules doivent être strictement croissantes")
        self.cells = cells
        pieces = [np.geomspace(cells[i], cells[i + 1], sub_cells + 1) for i in range(cells.size - 1)]
        if left_tail_decades > 0:
            count = int(left_tail_decades * tail_points_per_decade) + 1
            pieces.append(np.geomspace(cells[0] * 10.0 ** (-left_tail_decades), cells[0], count))
        fine = np.concatenate(pieces)
        extra = []
        for point in breakpoints:
            extra.extend([point * (1 - BREAK_OFFSET), point * (1 + BREAK_OFFSET)])
        fine = np.concatenate([fine, np.asarray(extra, dtype=float)])
        lowest = cells[0] * 10.0 ** (-left_tail_decades) if left_tail_decades > 0 else cells[0]
        fine = fine[(fine >= lowest) & (fine <= cells[-1])]
        for point in avoid:
            fine = np.where(np.abs(fine - point) <= 1e-12 * point, point * (1 + BREAK_OFFSET), fine)
        self.fine = np.unique(fine)
        self.x = np.log(self.fine)
        self.dx = np.diff(self.x)
        left = cells[:-1]
        right = cells[1:]
        # columns[f, i] = |cellule i ∩ [fine_f, inf)|
        self.columns = np.clip(right[None, :] - np.maximum(self.fine[:, None], left[None, :]), 0.0, None)
        self.widths = right - left

    @property
    def size(self):
        return self.cells.size - 1

    def tails(self, h):
        """H(t) = intégrale de h sur [t, inf) aux noeuds fins (exacte)"""
        return self.columns @ np.asarray(h, dtype=float)

    def integrate(self, values):
        """Trapèzes en x = ln t de values (dt = t dx); accepte (F,) ou (F, K)"""
        y = np.asarray(values, dtype=float)
        weights = self.fine if y.ndim == 1 else self.fine[:, None]
        y = y * weights
        dx = self.dx if y.ndim == 1 else self.dx[:, None]
        return np.sum(0.5 * (y[:-1] + y[1:]) * dx, axis=0)

    def reverse_cumulative(self, values):
        """G(fine_f) = intégrale de values sur [fine_f, fine_F]"""
        y = np.asarray(values, dtype=float)
        weights = self.fine if y.ndim == 1 else self.fine[:, None]
        y = y * weights
        dx = self.dx if y.ndim == 1 else self.dx[:, None]
        segments = 0.5 * (y[:-1] + y[1:]) * dx
        tail = np.cumsum(segments[::-1], axis=0)[::-1]
        zero = np.zeros((1,) + segments.shape[1:])
        return np.concatenate([tail, zero], axis=0)
