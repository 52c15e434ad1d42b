"""Numerical laboratory for weighted composition operators on weighted Bergman spaces."""
__version__ = "0.1.0"
