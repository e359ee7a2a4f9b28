"""Spectral laboratory for the cubic-quintic NLS with non-vanishing boundary conditions."""

__version__ = "0.1.0"
