import json
import logging
import math
from functools import wraps

import click

logger = logging.getLogger(__name__)

# Codes de sortie de la CLI
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL = 3


class InvalidInputError(ValueError):
    """Entrée invalide (précondition violée, fichier mal formé, régime incompatible)"""


class IncompatibleSchemaError(InvalidInputError):
    """Version de schéma non supportée à la lecture"""


class NumericalError(RuntimeError):
    """Échec numérique (quadrature, recherche de racine)"""


class QuadratureError(NumericalError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BracketingError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def validate_positive(value, name, allow_inf=False):
    """Valide qu'une valeur est un réel strictement positif"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} doit être un nombre réel")
    if math.isnan(value) or value <= 0:
        raise InvalidInputError(f"{name} doit être strictement positif (reçu {value})")
    if math.isinf(value) and not allow_inf:
        raise InvalidInputError(f"{name} doit être fini")
    return value


def validate_interval(a, b, name="intervalle"):
    """Valide 0 <= a < b <= inf"""
    a = float(a)
    b = float(b)
    if math.isnan(a) or math.isnan(b) or a < 0 or not a < b:
        raise InvalidInputError(f"{name} invalide: il faut 0 <= a < b <= inf (reçu [{a}, {b}])")
    return a, b


def validate_tolerance(tol, name="tolérance"):
    tol = validate_positive(tol, name)
    if not 1e-12 <= tol <= 1e-2:
        raise InvalidInputError(f"{name} doit être dans [1e-12, 1e-2] (reçu {tol})")
    return tol


def validate_required_fields(data, required_fields):
    """Valide que tous les champs requis sont présents"""
    if not isinstance(data, dict):
        raise InvalidInputError("Un objet JSON est attendu")
    missing_fields = [field for field in required_fields if field not in data]
    if missing_fields:
        raise InvalidInputError(f"Champs requis manquants: {', '.join(missing_fields)}")
    return True


def json_pointer_message(error, text):
    """Formate une erreur de parsing JSON avec sa position (ligne, colonne, pointeur)"""
    line = text.splitlines()[error.lineno - 1] if error.lineno - 1 < len(text.splitlines()) else ""
    pointer = " " * (error.colno - 1) + "^"
    return f"JSON invalide ligne {error.lineno}, colonne {error.colno}: {error.msg}\n{line}\n{pointer}"


def _fail(func, message, exit_code, level=logging.WARNING):
    logger.log(level, f"{message} in {func.__name__}")
    click.echo(json.dumps(error_payload(message, exit_code), ensure_ascii=False), err=True)
    return exit_code


def handle_cli_error(func):
    """Décorateur qui traduit les exceptions en codes de sortie cohérents"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            result = func(*args, **kwargs)
            return EXIT_OK if result is None else result
        except json.JSONDecodeError as e:
            return _fail(func, f"Parse error: {e.msg}", EXIT_INVALID_INPUT)
        except FileNotFoundError as e:
            return _fail(func, f"Missing file: {str(e)}", EXIT_INVALID_INPUT)
        except ValueError as e:
            return _fail(func, f"Validation error: {str(e)}", EXIT_INVALID_INPUT)
        except NumericalError as e:
            return _fail(func, f"Numerical error: {str(e)}", EXIT_NUMERICAL, logging.ERROR)
        except Exception as e:
            return _fail(func, f"Unexpected error: {str(e)}", EXIT_UNEXPECTED, logging.ERROR)
    return wrapper


def success_payload(data=None, message="Opération réussie"):
    """Format standard des documents de succès"""
    payload = {"status": "ok", "message": message}
    if data is not None:
        payload["data"] = data
    return payload


def error_payload(message="Erreur", exit_code=EXIT_INVALID_INPUT, details=None):
    """Format standard des documents d'erreur"""
    payload = {"status": "error", "error": message, "exit_code": exit_code}
    if details:
        payload["details"] = details
    return payload
