"""Finite-dimensional supermaps and locally-applicable transformations."""

__version__ = "0.1.0"
