"""Numerical verification of the second-order exchange self-energy reduction chain."""

__version__ = "0.1.0"
