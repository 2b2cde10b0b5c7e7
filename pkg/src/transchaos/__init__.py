"""Numerical laboratory for left-translation semigroups on weighted function spaces."""

__version__ = "0.1.0"
