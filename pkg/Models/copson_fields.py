import math

from marshmallow import ValidationError, fields

TOP_FLAGS = ('0', 'inf')


class ExtendedFloat(fields.Float):
    """Réel étendu: l'infini reste un float, l'encodeur des rapports l'écrit "inf" """

    def __init__(self, *args, **kwargs):
        kwargs.setdefault('allow_nan', True)
        super().__init__(*args, **kwargs)

    def _serialize(self, value, attr, obj, **kwargs):
        if value is None:
            return None
        return float(value)

    def _deserialize(self, value, attr, data, **kwargs):
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered in ("inf", "+inf", "infinity"):
                return math.inf
            if lowered in ("-inf", "-infinity"):
                return -math.inf
            if lowered == "nan":
                return math.nan
            raise ValidationError(f"Réel étendu invalide: {value!r}")
        return super()._deserialize(value, attr, data, **kwargs)


class Support(fields.Field):
    """Intervalle [a, b] avec b éventuellement infini"""

    def _serialize(self, value, attr, obj, **kwargs):
        if value is None:
            return None
        a, b = value
        return [float(a), float(b)]

    def _deserialize(self, value, attr, data, **kwargs):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ValidationError("Le support doit être une liste [a, b]")
        bound = ExtendedFloat()
        a = bound.deserialize(value[0])
        b = bound.deserialize(value[1])
        return (a, b)


class TopFlag(fields.Field):
    """Comportement de phi à l'infini: '0' (fini) ou 'inf', écrit comme l'infini des réels étendus"""

    def _serialize(self, value, attr, obj, **kwargs):
        if value is None:
            return None
        return math.inf if value == 'inf' else value

    def _deserialize(self, value, attr, data, **kwargs):
        if isinstance(value, float) and math.isinf(value) and value > 0:
            return 'inf'
        if isinstance(value, str) and value in TOP_FLAGS:
            return value
        raise ValidationError("top_flag doit être '0' ou 'inf'")
