"""Quantum reference spectra: finite-difference and oscillator-basis
diagonalisation, doublet splittings and the trace-ratio estimator."""

from .spectrum import (
    QuantumSpectrum,
    SplittingPoint,
    diagonalize,
    find_doublets,
    splitting_at_energy,
    trace_ratio_splitting,
)

__all__ = [
    "QuantumSpectrum",
    "SplittingPoint",
    "diagonalize",
    "find_doublets",
    "splitting_at_energy",
    "trace_ratio_splitting",
]
