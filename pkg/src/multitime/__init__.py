"""Numerical checks of multi-time quantum evolution and its consistency conditions."""

__version__ = "0.1.0"
