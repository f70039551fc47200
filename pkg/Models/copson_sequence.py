import math
from dataclasses import dataclass, field

from marshmallow import Schema, ValidationError, fields, post_load, validates_schema

from Models.copson_fields import TOP_FLAGS, ExtendedFloat, TopFlag
from utils import InvalidInputError

LABELS = ('K1', 'K2')


@dataclass(frozen=True)
class DiscretizingSequence:
    """Fenêtre finie de la suite discrétisante.

    labels[i] est l'étiquette du pas qui mène à t[i] (celle de t[0] est
    sans objet et vaut 'K1'). Quand top_flag vaut '0', le dernier point est
    la sentinelle inf.
    """
    t: tuple
    labels: tuple
    top_flag: str
    complete_low: bool
    complete_high: bool
    collapsed: tuple = ()
    flags: tuple = ()

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'labels', tuple(self.labels))
        if len(self.labels) != len(t):
            raise InvalidInputError("Une étiquette par point est attendue")
        if any(label not in LABELS for label in self.labels):
            raise InvalidInputError("Les étiquettes doivent être 'K1' ou 'K2'")
        if self.top_flag not in TOP_FLAGS:
            raise InvalidInputError("top_flag doit être '0' ou 'inf'")
        if any(b <= a for a, b in zip(t[:-1], t[1:])):
            raise InvalidInputError("La suite doit être strictement croissante")

    def __len__(self):
        return len(self.t)

    @property
    def has_sentinel(self):
        return bool(self.t) and math.isinf(self.t[-1])

    def cells(self):
        """Couples (t_{k-1}, t_k) consécutifs"""
        return list(zip(self.t[:-1], self.t[1:]))


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    worst_ratio: float
    worst_index: int = -1
    vacuous: bool = False


@dataclass(frozen=True)
class VerificationReport:
    checks: dict
    copson9_constant: float
    passed: bool
    vacuous: bool = False
    notes: tuple = field(default_factory=tuple)

    def __getitem__(self, name):
        return self.checks[name]


class DiscretizingSequenceSchema(Schema):
    t = fields.List(ExtendedFloat(), required=True)
    labels = fields.List(fields.String(), required=True)
    top_flag = TopFlag(required=True)
    complete_low = fields.Boolean(required=True)
    complete_high = fields.Boolean(required=True)
    collapsed = fields.List(fields.Integer(), load_default=list)
    flags = fields.List(fields.String(), load_default=list)

    @validates_schema
    def validate_labels(self, data, **kwargs):
        if len(data['t']) != len(data['labels']):
            raise ValidationError("Une étiquette par point est attendue", field_name='labels')

    @post_load
    def make_sequence(self, data, **kwargs):
        data['collapsed'] = tuple(data['collapsed'])
        data['flags'] = tuple(data['flags'])
        return DiscretizingSequence(**data)


class PropertyCheckSchema(Schema):
    name = fields.String()
    passed = fields.Boolean()
    worst_ratio = ExtendedFloat()
    worst_index = fields.Integer()
    vacuous = fields.Boolean()


class VerificationReportSchema(Schema):
    checks = fields.Dict(keys=fields.String(), values=fields.Nested(PropertyCheckSchema))
    copson9_constant = ExtendedFloat()
    passed = fields.Boolean()
    vacuous = fields.Boolean()
    notes = fields.List(fields.String())
