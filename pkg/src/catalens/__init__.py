"""Singular-value computations for catalytic majorization of compact operators."""

from .spectra import Spectrum, submajorizes, tensor
from .catalysis import find_catalyst, pm_check, verify_catalysis

__all__ = ["Spectrum", "submajorizes", "tensor", "find_catalyst", "pm_check", "verify_catalysis"]
__version__ = "0.1.0"
