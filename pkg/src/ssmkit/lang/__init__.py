from .parser import parse_model
from .printer import pretty_print
from .validate import load_model, validate_model

__all__ = ["parse_model", "pretty_print", "validate_model", "load_model"]
