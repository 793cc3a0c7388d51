"""Numerical toolkit for finite-dimensional operator spaces with partial products."""

__version__ = "0.1.0"
