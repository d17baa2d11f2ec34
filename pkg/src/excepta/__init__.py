"""excepta: quadratic eigenvalue bands and exceptional-line topology tools."""

from .qep import QuadraticMatrixPolynomial, Spectrum, solve

__all__ = ["QuadraticMatrixPolynomial", "Spectrum", "solve"]
__version__ = "0.1.0"
