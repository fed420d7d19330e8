"""Locking-free finite elements for Reissner-Mindlin plates."""

__version__ = "0.1.0"
