import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from marshmallow import Schema, ValidationError, fields, post_load, validates_schema

from Models.copson_fields import ExtendedFloat
from utils import InvalidInputError


@dataclass(frozen=True)
class GridSpec:
    """Grille log-uniforme de travail sur [t_min, t_max]"""
    t_min: float
    t_max: float
    points_per_decade: int

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max < math.inf):
            raise InvalidInputError(
                f"Grille invalide: il faut 0 < t_min < t_max < inf (reçu {self.t_min}, {self.t_max})"
            )
        if int(self.points_per_decade) != self.points_per_decade or self.points_per_decade < 1:
            raise InvalidInputError("points_per_decade doit être un entier >= 1")
        object.__setattr__(self, 'points_per_decade', int(self.points_per_decade))

    @property
    def decades(self):
        return math.log10(self.t_max / self.t_min)

    @property
    def size(self):
        return math.ceil(self.points_per_decade * self.decades - 1e-9) + 1

    def nodes(self):
        return np.logspace(math.log10(self.t_min), math.log10(self.t_max), self.size)

    def widened(self, factor):
        """Même densité, fenêtre [t_min/factor, factor*t_max]"""
        return GridSpec(self.t_min / factor, self.t_max * factor, self.points_per_decade)

    def refined(self, factor=2):
        return GridSpec(self.t_min, self.t_max, self.points_per_decade * factor)

    def restricted(self, a, b):
        """Sous-grille de même densité sur [a, b] (bornes tronquées à la fenêtre si infinies)"""
        lo = a if a > 0 else min(self.t_min, b * 1e-3)
        hi = b if b < math.inf else max(self.t_max, 10 * lo)
        return GridSpec(lo, hi, self.points_per_decade)


@dataclass(frozen=True)
class Estimate:
    value: float
    abs_error: float = 0.0
    argmax: Optional[float] = None

    def __post_init__(self):
        if math.isfinite(self.value) and not math.isfinite(self.abs_error):
            raise InvalidInputError("abs_error doit être fini quand value est fini")


class GridSpecSchema(Schema):
    t_min = fields.Float(required=True, metadata={'description': 'Borne gauche de la fenêtre'})
    t_max = fields.Float(required=True, metadata={'description': 'Borne droite de la fenêtre'})
    points_per_decade = fields.Integer(required=True, metadata={'description': 'Densité de la grille'})

    @validates_schema
    def validate_window(self, data, **kwargs):
        if not 0 < data['t_min'] < data['t_max']:
            raise ValidationError("Il faut 0 < t_min < t_max", field_name='t_max')
        if data['points_per_decade'] < 1:
            raise ValidationError("points_per_decade doit être >= 1", field_name='points_per_decade')

    @post_load
    def make_grid(self, data, **kwargs):
        return GridSpec(**data)


class EstimateSchema(Schema):
    value = ExtendedFloat(required=True)
    abs_error = ExtendedFloat(load_default=0.0)
    argmax = fields.Float(allow_none=True, load_default=None)

    @post_load
    def make_estimate(self, data, **kwargs):
        return Estimate(**data)
