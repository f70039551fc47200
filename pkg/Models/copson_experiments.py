from dataclasses import dataclass
from typing import Optional

from marshmallow import Schema, ValidationError, fields, post_load, validates_schema

from Models.copson_grid import GridSpec, GridSpecSchema
from Models.copson_problem import Problem, ProblemSchema
from utils import InvalidInputError

EXPECTED_TAGS = ('finite', 'infinite')


@dataclass(frozen=True)
class FamilySpec:
    """Famille de problèmes tirés au hasard: u = t^a, w = t^b, v = t^c e^{γt}"""
    p: float
    q: float
    m: float
    u_power: tuple = (0.0, 1.0)
    w_power: tuple = (0.0, 1.0)
    v_power: tuple = (0.0, 0.5)
    v_rate: tuple = (0.5, 2.0)
    grid: Optional[GridSpec] = None

    def __post_init__(self):
        for name in ('u_power', 'w_power', 'v_power', 'v_rate'):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise InvalidInputError(f"Intervalle {name} invalide: [{lo}, {hi}]")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.u_power[0] <= -1 or self.w_power[0] <= -1:
            raise InvalidInputError("Les exposants de u et w doivent être > -1 (phi finie)")


@dataclass(frozen=True)
class DichotomyCase:
    name: str
    problem: Problem
    expected: Optional[str] = None

    def __post_init__(self):
        if self.expected is not None and self.expected not in EXPECTED_TAGS:
            raise InvalidInputError(f"expected doit être 'finite' ou 'infinite' (reçu {self.expected})")


class FamilySpecSchema(Schema):
    p = fields.Float(required=True)
    q = fields.Float(required=True)
    m = fields.Float(required=True)
    u_power = fields.Tuple((fields.Float(), fields.Float()), load_default=(0.0, 1.0))
    w_power = fields.Tuple((fields.Float(), fields.Float()), load_default=(0.0, 1.0))
    v_power = fields.Tuple((fields.Float(), fields.Float()), load_default=(0.0, 0.5))
    v_rate = fields.Tuple((fields.Float(), fields.Float()), load_default=(0.5, 2.0))
    grid = fields.Nested(GridSpecSchema, allow_none=True, load_default=None)

    @post_load
    def make_family(self, data, **kwargs):
        return FamilySpec(**data)


class DichotomyCaseSchema(Schema):
    name = fields.String(required=True)
    problem = fields.Nested(ProblemSchema, required=True)
    expected = fields.String(allow_none=True, load_default=None)

    @validates_schema
    def validate_expected(self, data, **kwargs):
        if data.get('expected') not in (None,) + EXPECTED_TAGS:
            raise ValidationError("expected doit être 'finite' ou 'infinite'", field_name='expected')

    @post_load
    def make_case(self, data, **kwargs):
        return DichotomyCase(**data)
