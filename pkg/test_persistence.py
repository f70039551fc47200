import json
import math

import numpy as np
import pytest

from Conditions.conditions import evaluate_all
from config import DevelopmentConfig, TestingConfig
from Models.copson_reports import ConditionReportSchema
from Persistence.persistence import (
    COUNTEREXAMPLE_COLUMNS, SCHEMA_VERSION, SWEEP_COLUMNS, canonical_json, compare_with_baseline, config_digest,
    digest, make_envelope, read_baseline, read_report, read_table, write_baseline, write_report, write_table,
)
from utils import IncompatibleSchemaError, InvalidInputError


def test_canonical_json_sorts_keys_and_encodes_infinity():
    assert canonical_json({'b': 1.0, 'a': math.inf}) == '{"a":"inf","b":1}'
    assert canonical_json([np.float64(0.5), np.int64(3), None, True]) == '[0.5,3,null,true]'
    assert canonical_json({'x': -math.inf}) == '{"x":"-inf"}'


def test_canonical_json_keeps_full_precision():
    value = 0.1 + 0.2
    assert float(json.loads(canonical_json([value]))[0]) == value


def test_canonical_json_rejects_unknown_types():
    with pytest.raises(InvalidInputError):
        canonical_json({'x': object()})


def test_digest_is_stable():
    assert digest({'a': 1, 'b': [1.0, 2.0]}) == digest({'b': [1.0, 2.0], 'a': 1})
    assert len(digest({})) == 64
    assert config_digest(TestingConfig) == config_digest(TestingConfig)
    assert config_digest(TestingConfig) != config_digest(DevelopmentConfig)


def test_report_files_are_byte_identical(tmp_path):
    envelope = make_envelope({'value': 1.5, 'bound': math.inf}, TestingConfig, timestamp='fixed')
    first, second = tmp_path / 'a.json', tmp_path / 'b.json'
    write_report(envelope, first)
    write_report(envelope, second)
    assert first.read_bytes() == second.read_bytes()


def test_report_round_trip(tmp_path, exp_problem, a1_value):
    report = evaluate_all(exp_problem, truncation=False)
    path = tmp_path / 'check.json'
    write_report(make_envelope({'report': ConditionReportSchema().dump(report)}, TestingConfig), path)
    envelope = read_report(path)
    assert envelope.schema_version == SCHEMA_VERSION
    assert envelope.config_digest == config_digest(TestingConfig)
    loaded = ConditionReportSchema().load(envelope.payload['report'])
    assert loaded.regime == report.regime
    assert loaded.admissibility.top_flag == 'inf'
    assert loaded.conditions[0].value == report.conditions[0].value
    assert loaded.theorem_bound.value == pytest.approx(a1_value, rel=1e-6)


def test_restore_infinity(tmp_path):
    path = tmp_path / 'inf.json'
    write_report(make_envelope({'values': [1.0, math.inf]}), path)
    assert read_report(path).payload['values'][1] == math.inf
    assert read_report(path, restore_infinity=False).payload['values'][1] == 'inf'


def test_future_schema_version_is_rejected(tmp_path):
    path = tmp_path / 'future.json'
    path.write_text(json.dumps({
        'schema_version': SCHEMA_VERSION + 1, 'tool_version': '9.0.0', 'config_digest': '',
        'payload': {}, 'timestamp': 'later',
    }))
    with pytest.raises(IncompatibleSchemaError):
        read_report(path)


def test_csv_table_with_infinity(tmp_path):
    path = tmp_path / 'counterexample.csv'
    rows = [{'n': 1, 'a6': 1.25, 'c_lower': 0.5, 'upper_bound_d': math.inf}]
    write_table(rows, path, COUNTEREXAMPLE_COLUMNS)
    assert path.read_text().splitlines()[0] == ','.join(COUNTEREXAMPLE_COLUMNS)
    frame = read_table(path)
    assert frame.loc[0, 'a6'] == 1.25
    assert math.isinf(frame.loc[0, 'upper_bound_d'])


def test_empty_table_has_header_only(tmp_path):
    path = tmp_path / 'sweep.csv'
    write_table([], path, SWEEP_COLUMNS)
    assert path.read_text().strip() == ','.join(SWEEP_COLUMNS)


def test_baseline_record_and_compare(tmp_path):
    path = tmp_path / 'baseline.json'
    assert read_baseline(path) is None
    assert compare_with_baseline({'a': 1.0}, None) == {}
    write_baseline({'a': 1.0, 'c': 2.0}, path, TestingConfig)
    baseline = read_baseline(path)
    assert baseline == {'a': 1.0, 'c': 2.0}
    assert compare_with_baseline({'a': 1.05, 'c': 2.5, 'd': 1.0}, baseline) == {'a': True, 'c': False}


def test_infinity_strings_are_reserved():
    """La chaîne "inf" et le réel inf ne peuvent pas produire le même encodage"""
    with pytest.raises(InvalidInputError):
        canonical_json({'flag': 'inf'})
    with pytest.raises(InvalidInputError):
        digest(['nan'])
    assert digest({'flag': math.inf}) != digest({'flag': 'infinite'})


def test_report_is_read_back_exactly(tmp_path):
    payload = {'bound': math.inf, 'low': -math.inf, 'values': [1.5, 2.0], 'label': 'K1'}
    path = tmp_path / 'exact.json'
    write_report(make_envelope(payload, TestingConfig, timestamp='fixed'), path)
    assert read_report(path).payload == payload
