"""Numerical lab for partially hyperbolic skew products on the 2-torus."""

__version__ = "0.1.0"
