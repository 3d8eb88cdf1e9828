from .ir import ModelIr
from .rng import RngStream

__all__ = ["ModelIr", "RngStream"]
