"""Rewriting nonlinear branch conditions into equivalent linear ones."""

__version__ = "0.1.0"
