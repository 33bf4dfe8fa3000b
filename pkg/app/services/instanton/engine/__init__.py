"""Instanton engine - large-deviation paths for rare hitting events.

This module provides:
- Dynamics models and deterministic flows
- Action functional and the Gaussian initial-state cost
- Direct transcription with reverse-mode gradients
- Constrained ML and MAP solves with multi-start
- Maximum-principle verification
"""

# Action and priors
from .action import (
    InitialDistribution,
    action_functional,
    cumulative_action,
    initial_cost,
    initial_cost_gradient,
    map_objective,
    recover_deviation,
)

# Dynamics
from .dynamics import (
    DynamicsModel,
    drift,
    finite_difference_jacobian,
    flow_deterministic,
    jacobian_check,
    rk4_step,
)

# Multi-start
from .multi_start import deduplicate, multi_start

# Paths
from .paths import AdjointPath, Path, TimeGrid, sup_norm_distance

# Verification
from .pmp import (
    hamiltonian,
    integrate_adjoint,
    optimal_deviation,
    projected_deviation,
    transversality_residuals,
    verify_solution,
)

# Solution container
from .solution import VariationalSolution

# Solves
from .solver import (
    ConvergenceError,
    InitialGuess,
    quasipotential,
    solve_map,
    solve_ml,
    straight_line_guess,
)

# Transcription
from .transcription import Cotangents, DirectTranscription, Tape

# Unsafe sets
from .unsafe_set import UnsafeSet, outside_band, separation_below, upper_half_line

__all__ = [
    # Paths
    "TimeGrid",
    "Path",
    "AdjointPath",
    "sup_norm_distance",
    # Dynamics
    "DynamicsModel",
    "drift",
    "rk4_step",
    "flow_deterministic",
    "finite_difference_jacobian",
    "jacobian_check",
    # Unsafe sets
    "UnsafeSet",
    "upper_half_line",
    "outside_band",
    "separation_below",
    # Action
    "InitialDistribution",
    "action_functional",
    "cumulative_action",
    "initial_cost",
    "initial_cost_gradient",
    "map_objective",
    "recover_deviation",
    # Transcription
    "DirectTranscription",
    "Tape",
    "Cotangents",
    # Solves
    "ConvergenceError",
    "InitialGuess",
    "VariationalSolution",
    "solve_ml",
    "solve_map",
    "quasipotential",
    "straight_line_guess",
    "multi_start",
    "deduplicate",
    # Verification
    "hamiltonian",
    "optimal_deviation",
    "projected_deviation",
    "integrate_adjoint",
    "transversality_residuals",
    "verify_solution",
]
