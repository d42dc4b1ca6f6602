"""Bundled models and the user-model config language."""
from .bundled import (BUILTINS, OscillatorParams, PendulumParams, Setup, builtin,
                      make_oscillator, make_pendulum)
from .config import ModelConfigError, ModelValidationWarning, load_model, parse_model
from .sources import bundled_source
from .expr import (ArityError, Dual, ExpressionError, ExprSyntaxError, UnknownIdentifierError,
                   parse_expression, pretty)

__all__ = [
    "BUILTINS", "OscillatorParams", "PendulumParams", "Setup", "builtin", "make_oscillator",
    "make_pendulum", "ModelConfigError", "ModelValidationWarning", "load_model", "parse_model",
    "ArityError", "Dual", "ExpressionError", "ExprSyntaxError", "UnknownIdentifierError",
    "parse_expression", "pretty", "bundled_source",
]
