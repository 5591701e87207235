"""Riemann-surface topology, complex action integrals and tunnelling
splittings for one-dimensional polynomial Hamiltonians."""

__version__ = "0.1.0"
