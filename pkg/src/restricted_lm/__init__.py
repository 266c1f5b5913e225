"""Bayesian linear models updated by robust summary statistics instead of the full data."""

__version__ = "0.1.0"
