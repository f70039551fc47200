import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, fields as dataclass_fields
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd
from marshmallow import Schema, fields, post_load

from Models.copson_reports import CounterexampleRow, SweepRecord
from utils import IncompatibleSchemaError, InvalidInputError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TOOL_VERSION = '1.0.0'
FLOAT_FORMAT = '%.17g'
RESERVED_STRINGS = ('inf', '-inf', 'nan')

SWEEP_COLUMNS = tuple(f.name for f in dataclass_fields(SweepRecord))
COUNTEREXAMPLE_COLUMNS = tuple(f.name for f in dataclass_fields(CounterexampleRow))


@dataclass(frozen=True)
class ReportEnvelope:
    schema_version: int
    tool_version: str
    config_digest: str
    payload: dict
    timestamp: str


class ReportEnvelopeSchema(Schema):
    schema_version = fields.Integer(required=True)
    tool_version = fields.String(required=True)
    config_digest = fields.String(required=True)
    payload = fields.Raw(required=True)
    timestamp = fields.String(required=True)

    @post_load
    def make_envelope(self, data, **kwargs):
        return ReportEnvelope(**data)


def _encode(value):
    """Encodage JSON canonique: clés triées, réels à 17 chiffres, "inf" pour l'infini.

    Les chaînes "inf", "-inf" et "nan" sont refusées, réservées aux réels non finis.
    """
    if value is None:
        return 'null'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return '"inf"' if value > 0 else '"-inf"'
        if math.isnan(value):
            return '"nan"'
        return FLOAT_FORMAT % value
    if isinstance(value, str):
        if value in RESERVED_STRINGS:
            raise InvalidInputError(f"La chaîne {value!r} est réservée aux réels étendus")
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = sorted((str(k), v) for k, v in value.items())
        return '{' + ','.join(f'{json.dumps(k, ensure_ascii=False)}:{_encode(v)}' for k, v in items) + '}'
    if isinstance(value, (list, tuple)):
        return '[' + ','.join(_encode(v) for v in value) + ']'
    if hasattr(value, 'item'):
        # scalaires numpy
        return _encode(value.item())
    raise InvalidInputError(f"Valeur non sérialisable: {type(value).__name__}")


def canonical_json(value):
    return _encode(value)


def digest(value):
    return hashlib.sha256(canonical_json(value).encode('utf-8')).hexdigest()


def config_digest(config_class):
    """Empreinte des clés de configuration (attributs en majuscules)"""
    values = {name: getattr(config_class, name) for name in dir(config_class) if name.isupper()}
    return digest(values)


def make_envelope(payload, config_class=None, timestamp=None):
    return ReportEnvelope(
        schema_version=SCHEMA_VERSION,
        tool_version=TOOL_VERSION,
        config_digest=config_digest(config_class) if config_class is not None else '',
        payload=payload,
        timestamp=timestamp or datetime.now(timezone.utc).isoformat(),
    )


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile('w', encoding='utf-8', dir=path.parent, delete=False,
                                         prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except Exception:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise


def write_report(envelope, path):
    """Écrit l'enveloppe en JSON canonique (écriture atomique)"""
    data = {
        'schema_version': envelope.schema_version,
        'tool_version': envelope.tool_version,
        'config_digest': envelope.config_digest,
        'payload': envelope.payload,
        'timestamp': envelope.timestamp,
    }
    _atomic_write(path, canonical_json(data) + '\n')
    logger.info(f"Report written to {path}")


def _restore(value):
    """Inverse de l'encodage des réels étendus"""
    if isinstance(value, dict):
        return {k: _restore(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_restore(v) for v in value]
    if value == 'inf':
        return math.inf
    if value == '-inf':
        return -math.inf
    if value == 'nan':
        return math.nan
    return value


def read_report(path, restore_infinity=True):
    """Relit une enveloppe; une version de schéma différente est refusée.

    Les chaînes "inf", "-inf" et "nan" redeviennent des réels sauf si
    restore_infinity est faux.
    """
    with open(path, encoding='utf-8') as f:
        data = json.load(f)
    envelope = ReportEnvelopeSchema().load(data)
    if envelope.schema_version != SCHEMA_VERSION:
        raise IncompatibleSchemaError(
            f"Version de schéma {envelope.schema_version} incompatible (attendue {SCHEMA_VERSION})"
        )
    if restore_infinity:
        return ReportEnvelope(envelope.schema_version, envelope.tool_version, envelope.config_digest,
                              _restore(envelope.payload), envelope.timestamp)
    return envelope


def write_table(rows, path, columns):
    """Table CSV (en-tête, une ligne par enregistrement, "inf" pour l'infini)"""
    frame = pd.DataFrame(list(rows), columns=list(columns))
    _atomic_write(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT))
    logger.info(f"Table with {len(frame)} rows written to {path}")


def read_table(path):
    return pd.read_csv(path)


def write_baseline(widths, path, config_class=None):
    """Enregistre les largeurs d'enveloppe par régime"""
    write_report(make_envelope({'envelope_widths': dict(widths)}, config_class, timestamp='baseline'), path)


def read_baseline(path):
    """Largeurs d'enveloppe enregistrées, None si aucune ligne de base"""
    if not os.path.exists(path):
        return None
    payload = read_report(path, restore_infinity=True).payload
    return payload.get('envelope_widths', {})


def compare_with_baseline(widths, baseline, slack=1.1):
    """Régime -> True si la largeur reste sous la ligne de base × slack"""
    if baseline is None:
        return {}
    return {
        regime: bool(width <= baseline[regime] * slack)
        for regime, width in widths.items() if regime in baseline
    }
