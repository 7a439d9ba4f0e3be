"""
Error types for Veritest
"""


class VeritestError(Exception):
    """Base class for every error raised by the toolkit."""


class ScoreSetMismatch(VeritestError, ValueError):
    """Two measures or transitions live on different score sets."""


class InvalidMeasure(VeritestError, ValueError):
    """Weights are negative or do not sum to one."""


class UnknownLabel(VeritestError, KeyError):
    """A type, test, message or decision label is not part of the environment."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown label"


class NotMostDiscerning(VeritestError, ValueError):
    """A testing function or authentication rate fails the discernment requirement."""


class IroningRequired(VeritestError, ValueError):
    """The virtual value is not increasing on the grid."""


class QuadratureError(VeritestError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NegativePrecision(VeritestError, ValueError):
    """The authentication rate increases away from the diagonal."""


class DocumentError(VeritestError, ValueError):
    """An environment document could not be parsed or validated."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        message = self.args[0] if self.args else "invalid document"
        if self.line is not None:
            return f"line {self.line}: {message}"
        return message
