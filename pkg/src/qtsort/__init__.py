"""Simulated space-bounded quantum sorting and lower-bound lab."""

__version__ = "0.1.0"
