"""Shared exception types."""


class ValidationError(ValueError):
    """An argument or state violates a documented precondition or invariant."""


class ConfigError(ValueError):
    """A run/service configuration is missing or inconsistent."""


class EvaluationError(RuntimeError):
    """An expert failed to produce a prediction."""


class ParseError(ValueError):
    """A CSV input file is malformed; the message names the offending row."""


class DegenerateInputError(ValueError):
    """Statistical test input carries no usable signal (e.g. all-zero differences)."""
