"""Numerical lab for global L-infinity bounds of quasilinear parabolic problems with variable exponents."""
__version__ = "0.1.0"
