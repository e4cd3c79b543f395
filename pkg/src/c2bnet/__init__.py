"""Coefficient-to-basis networks for PDE inverse problems."""

__version__ = "0.1.0"
