"""Bayesian variable selection as a binary random field."""

__version__ = "0.1.0"
