"""Spectral toolkit for bounded ancient solutions of the unsteady Stokes system."""

from .grids import (
    Geometry,
    Grid,
    ScalarField,
    SpectralField,
    VectorField,
    random_scalar_field,
    random_vector_field,
)

__all__ = [
    "Geometry",
    "Grid",
    "ScalarField",
    "SpectralField",
    "VectorField",
    "random_scalar_field",
    "random_vector_field",
]

__version__ = "0.1.0"
