"""Randomly interacting spin-l bosons: counting, ensembles, and analysis."""

__version__ = "0.1.0"
