"""Open quantum harmonic oscillator: exact Liouville-space tools."""

from .params import ModelParams, validate, derived_scales, load_params
from .diffop import DiffOp, build_generator, commutator

__all__ = ["ModelParams", "validate", "derived_scales", "load_params",
           "DiffOp", "build_generator", "commutator"]
__version__ = "0.1.0"
