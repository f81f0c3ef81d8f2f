"""Spectral toolkit for drifted Cheng-Yau operators on model-space domains."""

from .eigensolve import Spectrum, counting_function, solve_generalized
from .geometry import CurvaturePinch, a_const, hessian_ratio, hyperbolic_distance, sn

__all__ = ["CurvaturePinch", "Spectrum", "a_const", "counting_function", "hessian_ratio",
           "hyperbolic_distance", "sn", "solve_generalized"]
__version__ = "0.1.0"
