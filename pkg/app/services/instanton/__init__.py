"""Instanton service module.

Provides:
- Variational engine (engine/)
"""

from .engine import (
    DynamicsModel,
    InitialDistribution,
    UnsafeSet,
    VariationalSolution,
    multi_start,
    quasipotential,
    solve_map,
    solve_ml,
    verify_solution,
)

__all__ = [
    "DynamicsModel",
    "InitialDistribution",
    "UnsafeSet",
    "VariationalSolution",
    "solve_ml",
    "solve_map",
    "quasipotential",
    "multi_start",
    "verify_solution",
]
