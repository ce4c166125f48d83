"""Boundary-vorticity Navier-Stokes laboratory on the half-space."""

from .fieldkit import (
    GradedGrid,
    PhysicalField,
    SpectralField,
    build_graded_grid,
    conormal_derivative,
    to_physical,
    to_spectral,
)

__all__ = [
    "GradedGrid",
    "PhysicalField",
    "SpectralField",
    "build_graded_grid",
    "conormal_derivative",
    "to_physical",
    "to_spectral",
]

__version__ = "0.1.0"
