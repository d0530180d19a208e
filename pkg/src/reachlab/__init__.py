"""Executable geometry of sets of positive reach on lattices."""

from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
