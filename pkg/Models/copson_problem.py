import math
from dataclasses import dataclass, field

import numpy as np
from marshmallow import Schema, ValidationError, fields, post_load, validates_schema

from Models.copson_grid import GridSpec, GridSpecSchema
from Models.copson_weights import WeightExpr, WeightExprField
from utils import InvalidInputError


@dataclass(frozen=True)
class Parameters:
    p: float
    q: float
    m: float

    def __post_init__(self):
        for name in ('p', 'q', 'm'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidInputError(f"{name} doit être un réel fini")
            object.__setattr__(self, name, float(value))
        if self.p < 1:
            raise InvalidInputError(f"p >= 1 est requis (reçu p={self.p})")
        if self.q <= 0 or self.m <= 0:
            raise InvalidInputError("q et m doivent être strictement positifs")

    @property
    def p_prime(self):
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    @property
    def q_prime(self):
        """Signé: négatif quand q < 1, inf quand q = 1"""
        return math.inf if self.q == 1 else self.q / (self.q - 1)

    @property
    def r(self):
        if self.q < self.p:
            return self.p * self.q / (self.p - self.q)
        return None

    @property
    def r_over_q_prime(self):
        if self.r is None:
            return None
        if self.q == 1:
            return 0.0
        return self.r / self.q_prime

    @property
    def theta(self):
        """q/m, exposant de l'intégrale intérieure de phi"""
        return self.q / self.m

    @property
    def doubling(self):
        """D = 2^{q/m+1}"""
        return 2.0 ** (self.q / self.m + 1)


@dataclass(frozen=True)
class Problem:
    params: Parameters
    u: WeightExpr
    v: WeightExpr
    w: WeightExpr
    grid: GridSpec
    anchor: float = 1.0

    def __post_init__(self):
        if not self.anchor > 0 or math.isinf(self.anchor):
            raise InvalidInputError(f"anchor doit être un réel strictement positif (reçu {self.anchor})")
        object.__setattr__(self, 'anchor', float(self.anchor))

    def with_grid(self, grid):
        return Problem(self.params, self.u, self.v, self.w, grid, self.anchor)

    def with_anchor(self, anchor):
        return Problem(self.params, self.u, self.v, self.w, self.grid, anchor)

    def with_weights(self, u=None, v=None, w=None):
        return Problem(
            self.params,
            self.u if u is None else u,
            self.v if v is None else v,
            self.w if w is None else w,
            self.grid,
            self.anchor,
        )

    def breakpoints(self):
        points = set(self.u.breakpoints()) | set(self.v.breakpoints()) | set(self.w.breakpoints())
        if self.u.has_log_terms or self.v.has_log_terms or self.w.has_log_terms:
            points.add(1.0)
        return tuple(sorted(points))


@dataclass(frozen=True)
class TestFunction:
    """h constante par morceaux: values[i] sur [nodes[i], nodes[i+1]), nulle hors de la grille"""
    nodes: tuple
    values: tuple = field(default_factory=tuple)

    __test__ = False

    def __post_init__(self):
        nodes = tuple(float(x) for x in self.nodes)
        values = tuple(float(x) for x in self.values)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'values', values)
        if len(nodes) < 2 or any(b <= a for a, b in zip(nodes[:-1], nodes[1:])):
            raise InvalidInputError("Les noeuds d'une fonction test doivent être strictement croissants")
        if len(values) != len(nodes) - 1:
            raise InvalidInputError(
                f"Une valeur par cellule est attendue ({len(nodes) - 1}), reçu {len(values)}"
            )
        if any(not (x >= 0) or math.isinf(x) for x in values):
            raise InvalidInputError("Les valeurs d'une fonction test doivent être finies et positives")

    @property
    def array(self):
        return np.asarray(self.values, dtype=float)

    @property
    def is_zero(self):
        return not any(self.values)

    def scaled(self, factor):
        return TestFunction(self.nodes, tuple(factor * x for x in self.values))

    def prolonged(self, nodes):
        """Transporte h sur une autre grille: valeur de la cellule contenant le milieu géométrique"""
        nodes = np.asarray(nodes, dtype=float)
        mids = np.sqrt(nodes[:-1] * nodes[1:])
        own = np.asarray(self.nodes)
        index = np.searchsorted(own, mids, side='right') - 1
        inside = (index >= 0) & (index < len(self.values))
        values = np.where(inside, self.array[np.clip(index, 0, len(self.values) - 1)], 0.0)
        return TestFunction(tuple(nodes), tuple(values))

    @classmethod
    def from_array(cls, problem, values):
        return cls(tuple(problem.grid.nodes()), tuple(np.asarray(values, dtype=float)))

    @classmethod
    def zeros(cls, problem):
        nodes = problem.grid.nodes()
        return cls(tuple(nodes), (0.0,) * (len(nodes) - 1))

    @classmethod
    def from_callable(cls, problem, f):
        """Échantillonne f au milieu géométrique de chaque cellule"""
        nodes = problem.grid.nodes()
        mids = np.sqrt(nodes[:-1] * nodes[1:])
        return cls(tuple(nodes), tuple(max(float(f(t)), 0.0) for t in mids))

    @classmethod
    def indicator(cls, problem, a, b):
        """Moyenne de l'indicatrice de (a, b) sur chaque cellule"""
        nodes = problem.grid.nodes()
        left, right = nodes[:-1], nodes[1:]
        overlap = np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None)
        return cls(tuple(nodes), tuple(overlap / (right - left)))


class ParametersSchema(Schema):
    p = fields.Float(required=True, metadata={'description': 'Exposant du membre de droite (p >= 1)'})
    q = fields.Float(required=True, metadata={'description': 'Exposant extérieur (q > 0)'})
    m = fields.Float(required=True, metadata={'description': 'Exposant intermédiaire (m > 0)'})

    @validates_schema
    def validate_exponents(self, data, **kwargs):
        if data['p'] < 1:
            raise ValidationError("p >= 1 est requis", field_name='p')
        if data['q'] <= 0:
            raise ValidationError("q doit être strictement positif", field_name='q')
        if data['m'] <= 0:
            raise ValidationError("m doit être strictement positif", field_name='m')

    @post_load
    def make_parameters(self, data, **kwargs):
        return Parameters(**data)


class WeightsSchema(Schema):
    u = WeightExprField(required=True)
    v = WeightExprField(required=True)
    w = WeightExprField(required=True)


class ProblemSchema(Schema):
    params = fields.Nested(ParametersSchema, required=True)
    weights = fields.Nested(WeightsSchema, required=True)
    grid = fields.Nested(GridSpecSchema, required=True)
    anchor = fields.Float(load_default=1.0, metadata={'description': 'Point de départ de la discrétisation'})

    @validates_schema
    def validate_anchor(self, data, **kwargs):
        if data.get('anchor', 1.0) <= 0:
            raise ValidationError("anchor doit être strictement positif", field_name='anchor')

    @post_load
    def make_problem(self, data, **kwargs):
        weights = data['weights']
        return Problem(data['params'], weights['u'], weights['v'], weights['w'], data['grid'], data['anchor'])

    def dump_problem(self, problem):
        return self.dump({
            'params': problem.params,
            'weights': {'u': problem.u, 'v': problem.v, 'w': problem.w},
            'grid': problem.grid,
            'anchor': problem.anchor,
        })


class TestFunctionSchema(Schema):
    nodes = fields.List(fields.Float(), required=True)
    values = fields.List(fields.Float(), required=True)

    __test__ = False

    @post_load
    def make_test_function(self, data, **kwargs):
        return TestFunction(tuple(data['nodes']), tuple(data['values']))
