import math
from dataclasses import dataclass, field

from marshmallow import Schema, ValidationError, fields, post_load, validates_schema

from Models.copson_fields import Support
from utils import InvalidInputError


@dataclass(frozen=True)
class WeightTerm:
    """coef * t^power * |ln t|^log_power * exp(exp_rate * t) sur le support (a, b]"""
    coef: float
    power: float = 0.0
    log_power: float = 0.0
    exp_rate: float = 0.0
    support: tuple = (0.0, math.inf)

    def __post_init__(self):
        a, b = self.support
        object.__setattr__(self, 'support', (float(a), float(b)))
        if not self.coef >= 0 or math.isinf(self.coef):
            raise InvalidInputError(f"coef doit être un réel positif ou nul (reçu {self.coef})")
        for name in ('power', 'log_power', 'exp_rate'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} doit être fini")
        a, b = self.support
        if not (0 <= a < b):
            raise InvalidInputError(f"Support invalide [{a}, {b}]: il faut 0 <= a < b <= inf")

    @property
    def is_zero(self):
        return self.coef == 0

    @property
    def is_pure_power(self):
        return self.log_power == 0 and self.exp_rate == 0

    @property
    def is_pure_exponential(self):
        return self.power == 0 and self.log_power == 0

    def raised(self, exponent):
        """Terme élevé à une puissance (valable là où il est seul actif)"""
        coef = self.coef ** exponent if self.coef > 0 else (0.0 if exponent > 0 else math.inf)
        return WeightTerm(
            coef=coef,
            power=self.power * exponent,
            log_power=self.log_power * exponent,
            exp_rate=self.exp_rate * exponent,
            support=self.support,
        )

    def scaled(self, factor):
        return WeightTerm(self.coef * factor, self.power, self.log_power, self.exp_rate, self.support)


@dataclass(frozen=True)
class WeightExpr:
    """Somme finie de WeightTerm; la liste vide est le poids nul"""
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))

    def __add__(self, other):
        return WeightExpr(self.terms + other.terms)

    def scaled(self, factor):
        return WeightExpr(tuple(term.scaled(factor) for term in self.terms))

    @property
    def active_terms(self):
        return tuple(term for term in self.terms if not term.is_zero)

    @property
    def is_zero(self):
        return not self.active_terms

    def breakpoints(self):
        """Extrémités finies et strictement positives des supports"""
        points = set()
        for term in self.active_terms:
            for end in term.support:
                if 0 < end < math.inf:
                    points.add(end)
        return tuple(sorted(points))

    @property
    def has_log_terms(self):
        return any(term.log_power != 0 for term in self.active_terms)

    @property
    def support_end(self):
        if self.is_zero:
            return 0.0
        return max(term.support[1] for term in self.active_terms)


# Constructeurs usuels
def constant(value=1.0, support=(0.0, math.inf)):
    return WeightExpr((WeightTerm(coef=value, support=support),))


def power(exponent, coef=1.0, support=(0.0, math.inf)):
    return WeightExpr((WeightTerm(coef=coef, power=exponent, support=support),))


def exponential(rate, coef=1.0, support=(0.0, math.inf)):
    return WeightExpr((WeightTerm(coef=coef, exp_rate=rate, support=support),))


def indicator(a, b, height=1.0):
    return constant(height, support=(a, b))


class WeightTermSchema(Schema):
    coef = fields.Float(required=True, metadata={'description': 'Coefficient positif ou nul'})
    power = fields.Float(load_default=0.0, metadata={'description': 'Exposant de t'})
    log_power = fields.Float(load_default=0.0, metadata={'description': 'Exposant de |ln t|'})
    exp_rate = fields.Float(load_default=0.0, metadata={'description': 'Taux gamma dans exp(gamma t)'})
    support = Support(load_default=(0.0, math.inf), metadata={'description': 'Support [a, b|"inf"]'})

    @validates_schema
    def validate_support(self, data, **kwargs):
        a, b = data.get('support', (0.0, math.inf))
        if not (0 <= a < b):
            raise ValidationError(f"Support invalide [{a}, {b}]", field_name='support')
        if data['coef'] < 0:
            raise ValidationError("coef doit être positif ou nul", field_name='coef')

    @post_load
    def make_term(self, data, **kwargs):
        return WeightTerm(**data)


class WeightExprField(fields.Field):
    """Un WeightExpr est un tableau JSON de termes"""

    def _serialize(self, value, attr, obj, **kwargs):
        if value is None:
            return None
        return WeightTermSchema(many=True).dump(list(value.terms))

    def _deserialize(self, value, attr, data, **kwargs):
        if not isinstance(value, list):
            raise ValidationError("Un poids doit être un tableau de termes")
        return WeightExpr(tuple(WeightTermSchema(many=True).load(value)))
