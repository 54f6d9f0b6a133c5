"""Catalytic energy extraction from finite-dimensional quantum batteries."""

__version__ = "0.1.0"
