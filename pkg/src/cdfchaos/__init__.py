"""Particles interacting through their empirical CDF."""

__version__ = "0.1.0"
