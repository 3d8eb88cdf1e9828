"""ssmkit: a state-space modelling language and SMC inference engine."""

from .core.rng import RngStream
from .lang import load_model, parse_model, pretty_print, validate_model

__version__ = "0.1.0"

__all__ = [
    "RngStream",
    "load_model",
    "parse_model",
    "pretty_print",
    "validate_model",
    "__version__",
]
