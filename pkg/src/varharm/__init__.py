"""Numerical harmonic analysis on variable-exponent spaces."""

__version__ = "0.1.0"
