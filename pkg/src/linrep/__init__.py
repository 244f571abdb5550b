"""Linear representations of nonlinear ODEs and Hamilton-Jacobi PDEs.

Upwind and spectral solvers for the Liouville, Koopman-von Neumann,
level-set and semiclassical Schrodinger formulations, with observable
post-processing, reference oracles and a gate-count registry.
"""

from .errors import (
    BudgetError,
    CausticError,
    DivergenceError,
    DomainError,
    LinrepError,
    StabilityError,
    UnderResolvedError,
    UnsupportedError,
    ValidationError,
)
from .grid import GridSpec, MeshStrategy, TimeGrid, mesh_for_schrodinger, mesh_for_spectral, mesh_for_upwind

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "CausticError",
    "DivergenceError",
    "DomainError",
    "GridSpec",
    "LinrepError",
    "MeshStrategy",
    "StabilityError",
    "TimeGrid",
    "UnderResolvedError",
    "UnsupportedError",
    "ValidationError",
    "mesh_for_schrodinger",
    "mesh_for_spectral",
    "mesh_for_upwind",
]
