"""Semiclassical spectra of the periodic Zakharov-Shabat operator.

Quantization-condition predictions (turning-point actions, leading-order
transition traces) checked against a monodromy-matrix oracle.
"""
__version__ = "0.1.0"

from .potential import FourierPotential  # noqa: E402
from .oracle import Rect, locate_eigenvalues, monodromy  # noqa: E402

__all__ = ["FourierPotential", "Rect", "locate_eigenvalues", "monodromy", "__version__"]
