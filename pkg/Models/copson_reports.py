from dataclasses import dataclass, field
from typing import Optional

from marshmallow import Schema, fields, post_load

from Models.copson_fields import ExtendedFloat, TopFlag
from Models.copson_problem import TestFunctionSchema


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    top_flag: Optional[str]
    phi_power_at_infinity: Optional[float]
    vanishes_at_zero: bool
    monotone: bool
    inconclusive: bool
    failures: tuple = ()
    probes: tuple = ()


@dataclass(frozen=True)
class Regime:
    label: str
    applicable: tuple
    combination: tuple


@dataclass(frozen=True)
class ConditionValue:
    name: str
    value: float
    argmax: Optional[float] = None
    breakdown: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    truncation_delta: Optional[float] = None


@dataclass(frozen=True)
class ConditionReport:
    regime: Regime
    admissibility: AdmissibilityReport
    conditions: tuple
    theorem_bound: ConditionValue


@dataclass(frozen=True)
class DiscreteConditionValue:
    name: str
    value: float
    contributions: tuple
    complete_low: bool
    complete_high: bool
    truncation_delta: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HolderReport:
    lhs: float
    rhs: float
    holds: bool
    saturator: tuple
    saturated_lhs: float
    saturation_error: float


@dataclass(frozen=True)
class GrowthReport:
    pairs: dict
    c_emp: float
    finite: bool


@dataclass(frozen=True)
class Saturator:
    kind: str
    interval: tuple
    test_function: object
    normalization: float
    ratio: Optional[float] = None


@dataclass(frozen=True)
class CEstimate:
    lower_bound: float
    best_h: object
    trace: tuple = ()
    seeds: tuple = ()
    method: str = 'coordinate_ascent'
    flags: tuple = ()


@dataclass(frozen=True)
class SweepRecord:
    index: int
    digest: str
    regime: str
    theorem_bound: Optional[float]
    c_lower: Optional[float]
    ratio: Optional[float]
    d_value: Optional[float]
    d_over_a: Optional[float]
    refinement_delta: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class CounterexampleRow:
    n: int
    a6: float
    c_lower: float
    upper_bound_d: float


@dataclass(frozen=True)
class CounterexampleTable:
    rows: tuple
    a6_monotone: bool
    bounded: bool
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DichotomyResult:
    name: str
    expected: Optional[str]
    observed: str
    levels: tuple
    passed: bool
    inconclusive: bool


class AdmissibilityReportSchema(Schema):
    admissible = fields.Boolean(required=True)
    top_flag = TopFlag(allow_none=True)
    phi_power_at_infinity = ExtendedFloat(allow_none=True)
    vanishes_at_zero = fields.Boolean()
    monotone = fields.Boolean()
    inconclusive = fields.Boolean()
    failures = fields.List(fields.Float())
    probes = fields.List(fields.List(ExtendedFloat()))

    @post_load
    def make_report(self, data, **kwargs):
        data['failures'] = tuple(data.get('failures', ()))
        data['probes'] = tuple(tuple(pair) for pair in data.get('probes', ()))
        return AdmissibilityReport(**data)


class RegimeSchema(Schema):
    label = fields.String(required=True)
    applicable = fields.List(fields.String())
    combination = fields.List(fields.String())

    @post_load
    def make_regime(self, data, **kwargs):
        return Regime(data['label'], tuple(data['applicable']), tuple(data['combination']))


class ConditionValueSchema(Schema):
    name = fields.String(required=True)
    value = ExtendedFloat(required=True)
    argmax = ExtendedFloat(allow_none=True)
    breakdown = fields.Dict(keys=fields.String(), values=ExtendedFloat())
    diagnostics = fields.Dict(keys=fields.String(), values=fields.Raw())
    truncation_delta = ExtendedFloat(allow_none=True)

    @post_load
    def make_value(self, data, **kwargs):
        return ConditionValue(**data)


class ConditionReportSchema(Schema):
    regime = fields.Nested(RegimeSchema, required=True)
    admissibility = fields.Nested(AdmissibilityReportSchema, required=True)
    conditions = fields.List(fields.Nested(ConditionValueSchema))
    theorem_bound = fields.Nested(ConditionValueSchema, allow_none=True)

    @post_load
    def make_report(self, data, **kwargs):
        data['conditions'] = tuple(data['conditions'])
        return ConditionReport(**data)


class DiscreteConditionValueSchema(Schema):
    name = fields.String(required=True)
    value = ExtendedFloat(required=True)
    contributions = fields.List(ExtendedFloat())
    complete_low = fields.Boolean()
    complete_high = fields.Boolean()
    truncation_delta = ExtendedFloat(allow_none=True)
    diagnostics = fields.Dict(keys=fields.String(), values=fields.Raw())

    @post_load
    def make_value(self, data, **kwargs):
        data['contributions'] = tuple(data['contributions'])
        return DiscreteConditionValue(**data)


class SaturatorSchema(Schema):
    kind = fields.String(required=True)
    interval = fields.List(ExtendedFloat())
    test_function = fields.Nested(TestFunctionSchema)
    normalization = ExtendedFloat()
    ratio = ExtendedFloat(allow_none=True)


class CEstimateSchema(Schema):
    lower_bound = ExtendedFloat(required=True)
    best_h = fields.Nested(TestFunctionSchema)
    trace = fields.List(ExtendedFloat())
    seeds = fields.List(fields.String())
    method = fields.String()
    flags = fields.List(fields.String())

    @post_load
    def make_estimate(self, data, **kwargs):
        for key in ('trace', 'seeds', 'flags'):
            data[key] = tuple(data.get(key, ()))
        return CEstimate(**data)


class SweepRecordSchema(Schema):
    index = fields.Integer(required=True)
    digest = fields.String(required=True)
    regime = fields.String(required=True)
    theorem_bound = ExtendedFloat(allow_none=True)
    c_lower = ExtendedFloat(allow_none=True)
    ratio = ExtendedFloat(allow_none=True)
    d_value = ExtendedFloat(allow_none=True)
    d_over_a = ExtendedFloat(allow_none=True)
    refinement_delta = ExtendedFloat(allow_none=True)
    error = fields.String(allow_none=True)

    @post_load
    def make_record(self, data, **kwargs):
        return SweepRecord(**data)


class CounterexampleRowSchema(Schema):
    n = fields.Integer(required=True)
    a6 = ExtendedFloat(required=True)
    c_lower = ExtendedFloat(required=True)
    upper_bound_d = ExtendedFloat(required=True)


class CounterexampleTableSchema(Schema):
    rows = fields.List(fields.Nested(CounterexampleRowSchema))
    a6_monotone = fields.Boolean()
    bounded = fields.Boolean()
    diagnostics = fields.Dict(keys=fields.String(), values=fields.Raw())


class DichotomyResultSchema(Schema):
    name = fields.String(required=True)
    expected = fields.String(allow_none=True)
    observed = fields.String(required=True)
    levels = fields.List(ExtendedFloat())
    passed = fields.Boolean()
    inconclusive = fields.Boolean()
