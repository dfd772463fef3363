"""Pseudo-spectral solver and verification harness for the regularized
stationary micropolar system on a periodic box."""

from .spectral import Grid, ScalarField, SpectralVectorField, make_grid
from .solver import SolverParams, SolveTrace, State, apply_T, picard_solve

__all__ = [
    "Grid",
    "ScalarField",
    "SolveTrace",
    "SolverParams",
    "SpectralVectorField",
    "State",
    "apply_T",
    "make_grid",
    "picard_solve",
]
