"""
Errores del laboratorio de homogeneización.

Todas las excepciones heredan de HomolabError (que a su vez es un ValueError),
así los comandos de gestión pueden capturarlas en un solo lugar.
"""


class HomolabError(ValueError):
    """Error base del laboratorio. Acepta un diccionario opcional de diagnóstico."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.message = message
        self.diagnostics = diagnostics or {}


# --- noise ---

class EmbeddingNotPSD(HomolabError):
    pass


class GridTooLarge(HomolabError):
    pass


class NonStationary(HomolabError):
    pass


class QuadratureFailure(HomolabError):
    pass


class NotIrreducible(HomolabError):
    pass


class InvalidGenerator(HomolabError):
    pass


class RankZero(HomolabError):
    pass


class TailDivergent(HomolabError):
    pass


# --- hermite ---

class DegreeTooLarge(HomolabError):
    pass


class QuadratureDivergence(HomolabError):
    pass


class OrderingViolation(HomolabError):
    pass


# --- roughpath ---

class DimensionMismatch(HomolabError):
    pass


class GridMismatch(HomolabError):
    pass


class HorizonTooShort(HomolabError):
    pass


class NotCentred(HomolabError):
    pass


# --- solver ---

class Blowup(HomolabError):
    pass


class NoConvergence(HomolabError):
    pass


class RegularityTooLow(HomolabError):
    pass


class FieldVanishes(HomolabError):
    pass


# --- lab ---

class RegimeMismatch(HomolabError):
    pass


class GateFailed(HomolabError):
    pass


class ConfigInvalid(HomolabError):
    """Configuración inválida; `field` nombra el campo que falló."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}", {'field': field})
        self.field = field
