"""Numerics for saddle measures of holomorphic endomorphisms of the projective plane."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
