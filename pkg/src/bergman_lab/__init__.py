"""Numerical laboratory for weighted commutators of the Bergman projection on the upper half-plane."""

from . import geometry, weights, symbols, operators, median, harness
from .geometry import GlobalConfig, Mesh

__all__ = ["geometry", "weights", "symbols", "operators", "median", "harness",
           "GlobalConfig", "Mesh"]
__version__ = "0.1.0"
