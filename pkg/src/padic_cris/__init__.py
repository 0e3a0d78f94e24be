"""Exact finite-precision models of crystalline and syntomic constructions."""

__version__ = "0.1.0"
