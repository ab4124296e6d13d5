"""Realized range-based estimation of integrated variance."""

__version__ = "0.1.0"
