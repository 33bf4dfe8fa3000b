"""Maximum-principle checks for candidate ML and MAP solutions.

The costate convention pairs with the control Hamiltonian
H(x, w, lam) = -1/2 |w|^2 + lam^T (b(x) + G w), maximised by w = G^T lam:

    lam' = -grad b(phi)^T lam
    lam(T) = -alpha grad f(phi(T)),  alpha >= 0, alpha f(phi(T)) = 0
    lam(0) = eps grad S0(phi(0))      (free initial state)
    H(T) = 0                          (final time strictly inside the window)

Deviations are piecewise linear on the path grid, so the maximising condition is
checked against the best piecewise-linear deviation for the costate swept back from
lam(T), i.e. the L2 projection of G^T lam. The nodal gap |w_k - G^T lam_k| is reported
alongside; it shrinks with the grid spacing squared.

Every residual is divided by (1 + the magnitudes of the terms it compares).
"""

import logging

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_banded

from app.schemas.results import ResidualReport, SolveMode

from .action import InitialDistribution
from .dynamics import DynamicsModel
from .paths import AdjointPath, Path
from .solution import VariationalSolution
from .transcription import DirectTranscription
from .unsafe_set import UnsafeSet

logger = logging.getLogger(__name__)


def optimal_deviation(model: DynamicsModel, lam: AdjointPath | NDArray[np.float64]) -> NDArray[np.float64]:
    """w = sigma^T lam_nu, batched over leading axes."""
    values = lam.values if isinstance(lam, AdjointPath) else np.asarray(lam, dtype=float)
    return values @ model.diffusion_matrix


def hamiltonian(
    model: DynamicsModel,
    x: NDArray[np.float64],
    w: NDArray[np.float64],
    lam: NDArray[np.float64],
) -> NDArray[np.float64] | float:
    x, w, lam = (np.asarray(a, dtype=float) for a in (x, w, lam))
    rate = model.drift(x) + w @ model.diffusion_matrix.T
    value = -0.5 * np.sum(w**2, axis=-1) + np.sum(lam * rate, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def integrate_adjoint(
    model: DynamicsModel,
    solution: VariationalSolution,
    initial_adjoint: NDArray[np.float64] | None = None,
) -> AdjointPath:
    """Integrate lam' = -grad b(phi)^T lam forward along the frozen solution path.

    Classical RK4 on the path grid; phi at half steps comes from a cubic Hermite
    interpolant whose slopes are b(phi) + G w.

    Args:
        model: Dynamics the solution was computed for.
        solution: Solve result carrying the path and its deviations.
        initial_adjoint: lam(0); defaults to the first row of the solver's costate.

    Returns:
        AdjointPath on the solution grid.

    Raises:
        ValueError: If the solution has no path, no deviations or no lam(0) to start from.
        FloatingPointError: If the costate leaves the floating-point range.
    """
    path = solution.path
    if path is None:
        raise ValueError(f"Solution has no path to integrate along (status {solution.status.value})")
    if initial_adjoint is None:
        if solution.adjoint is None:
            raise ValueError("Solution carries no costate and no lam(0) was given")
        initial_adjoint = solution.adjoint[0]
    lam = np.asarray(initial_adjoint, dtype=float)
    if lam.shape != (model.dimension,):
        raise ValueError(f"Adjoint has shape {lam.shape}, model expects ({model.dimension},)")
    if len(path.grid) < 2:
        return AdjointPath(grid=path.grid, values=lam[None, :].copy())
    if path.deviations is None:
        raise ValueError("Path carries no deviations")

    slopes = model.drift(path.states) + path.deviations @ model.diffusion_matrix.T
    spline = CubicHermiteSpline(path.times, path.states, slopes, axis=0)
    out = np.empty_like(path.states)
    out[0] = lam
    for k in range(path.grid.steps):
        t0 = path.times[k]
        h = path.times[k + 1] - t0

        def rhs(mu: NDArray[np.float64], offset: float) -> NDArray[np.float64]:
            return -model.drift_jacobian(spline(t0 + offset)).T @ mu

        k1 = rhs(lam, 0.0)
        k2 = rhs(lam + 0.5 * h * k1, 0.5 * h)
        k3 = rhs(lam + 0.5 * h * k2, 0.5 * h)
        k4 = rhs(lam + h * k3, h)
        lam = lam + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(lam)):
            raise FloatingPointError(f"Costate diverged at step {k + 1}")
        out[k + 1] = lam
    return AdjointPath(grid=path.grid, values=out)


def projected_deviation(
    model: DynamicsModel, path: Path, terminal_adjoint: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Piecewise-linear deviation maximising the summed Hamiltonian for a terminal costate.

    The costate is swept back from lam(T) through the RK4 steps of the path, and the
    moments int phi_k G^T lam dt are solved against the tridiagonal mass matrix of the
    hat functions phi_k.

    Args:
        model: Dynamics of the path.
        path: Path on a uniform grid, deviations included.
        terminal_adjoint: lam(T).

    Returns:
        Node values of the maximising deviation, shaped like `path.deviations`.
    """
    if path.deviations is None:
        raise ValueError("Path carries no deviations")
    if len(path.grid) < 2:
        return np.zeros_like(path.deviations)
    spacing = path.grid.spacing
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise ValueError("Maximising deviation needs a uniform grid")

    transcription = DirectTranscription(model, path.grid.steps)
    tape = transcription.forward(path.initial_state, path.deviations, path.grid.final_time)
    moments = transcription.backward(tape, np.asarray(terminal_adjoint, dtype=float)).deviations

    banded = np.zeros((3, len(path.grid)))
    banded[0, 1:] = spacing / 6.0
    banded[1, :-1] += spacing / 3.0
    banded[1, 1:] += spacing / 3.0
    banded[2, :-1] = spacing / 6.0
    return solve_banded((1, 1), banded, moments)


def _scaled(difference: NDArray[np.float64] | float, *magnitudes: float) -> float:
    return float(np.linalg.norm(difference)) / (1.0 + sum(abs(m) for m in magnitudes))


def _deviation_gap(w: NDArray[np.float64], reference: NDArray[np.float64]) -> float:
    per_node = np.linalg.norm(w - reference, axis=1) / (
        1.0 + np.linalg.norm(w, axis=1) + np.linalg.norm(reference, axis=1)
    )
    return float(np.max(per_node))


def transversality_residuals(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    solution: VariationalSolution,
    dist: InitialDistribution | None = None,
    tolerance: float = 1e-6,
    hamiltonian_tolerance: float = 1e-5,
) -> ResidualReport:
    """Boundary conditions, complementary slackness and the maximising condition.

    Args:
        model: Dynamics the solution was computed for.
        unsafe_set: Level-set description of D.
        solution: ML or MAP solution with its costate and terminal multiplier.
        dist: Prior over the initial state; required for MAP solutions.
        tolerance: Bound on the transversality, slackness and maximising residuals.
        hamiltonian_tolerance: Bound on |H(T)|, applied only when T is interior.

    Returns:
        ResidualReport with `passed` set from the applicable residuals.
    """
    if solution.path is None or solution.adjoint is None:
        raise ValueError(f"Solution has no path to check (status {solution.status.value})")
    path, lam, alpha = solution.path, solution.adjoint, solution.multiplier
    w = path.deviations

    grad_f = unsafe_set.gradient(path.final_state)
    final = _scaled(lam[-1] + alpha * grad_f, np.linalg.norm(lam[-1]), alpha * np.linalg.norm(grad_f))

    initial = None
    free_initial = solution.mode == SolveMode.MAP
    if free_initial:
        if dist is None or solution.eps is None:
            raise ValueError("MAP residuals need the prior and eps")
        prior_term = solution.eps * dist.cost_gradient(path.initial_state)
        initial = _scaled(lam[0] - prior_term, np.linalg.norm(lam[0]), np.linalg.norm(prior_term))

    level = float(unsafe_set.level(path.final_state))
    slackness = abs(alpha * level) / (1.0 + abs(alpha))

    consistency = _deviation_gap(w, projected_deviation(model, path, -alpha * grad_f))
    nodal_gap = _deviation_gap(w, optimal_deviation(model, lam))

    rate = model.drift(path.final_state)
    h_final = hamiltonian(model, path.final_state, w[-1], lam[-1])
    terminal = abs(h_final) / (1.0 + abs(float(lam[-1] @ rate)) + 0.5 * float(w[-1] @ w[-1]))

    interior = solution.window.is_interior(solution.final_time)
    checks = [final, slackness, consistency]
    if initial is not None:
        checks.append(initial)
    passed = all(c <= tolerance for c in checks) and (not interior or terminal <= hamiltonian_tolerance)

    return ResidualReport(
        initial_transversality=initial,
        final_transversality=final,
        complementary_slackness=slackness,
        terminal_hamiltonian=terminal,
        deviation_consistency=consistency,
        nodal_deviation_gap=nodal_gap,
        initial_state_free=free_initial,
        final_time_interior=interior,
        tolerance=tolerance,
        hamiltonian_tolerance=hamiltonian_tolerance,
        passed=passed,
    )


def verify_solution(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    solution: VariationalSolution,
    dist: InitialDistribution | None = None,
    tolerance: float = 1e-6,
    hamiltonian_tolerance: float = 1e-5,
    reintegration_tolerance: float = 1e-3,
) -> ResidualReport:
    """Transversality checks plus adjoint re-integration and Hamiltonian constancy.

    Args:
        model: Dynamics the solution was computed for.
        unsafe_set: Level-set description of D.
        solution: ML or MAP solution to check.
        dist: Prior over the initial state; required for MAP solutions.
        tolerance: Bound on the transversality, slackness and maximising residuals.
        hamiltonian_tolerance: Bound on the scaled max-min spread of H over the nodes.
        reintegration_tolerance: Bound on the relative gap between the solver's costate
            and the one re-integrated from its lam(0).

    Returns:
        ResidualReport whose `passed` covers every check.
    """
    report = transversality_residuals(model, unsafe_set, solution, dist, tolerance, hamiltonian_tolerance)
    path, lam = solution.path, solution.adjoint

    reintegrated = integrate_adjoint(model, solution)
    scale = float(np.max(np.linalg.norm(lam, axis=1)))
    drift_error = float(np.max(np.linalg.norm(reintegrated.values - lam, axis=1)))
    reintegration = 0.0 if scale == 0.0 else drift_error / scale

    h_values = np.atleast_1d(hamiltonian(model, path.states, path.deviations, lam))
    variation = float(np.ptp(h_values)) / (1.0 + float(np.max(np.abs(h_values))))

    passed = (
        report.passed
        and reintegration <= reintegration_tolerance
        and variation <= hamiltonian_tolerance
    )
    report = report.model_copy(
        update={
            "adjoint_reintegration": reintegration,
            "hamiltonian_variation": variation,
            "hamiltonian_tolerance": hamiltonian_tolerance,
            "reintegration_tolerance": reintegration_tolerance,
            "passed": passed,
        }
    )
    log = logger.info if passed else logger.warning
    log(
        "PMP check %s: final=%.2e initial=%s slack=%.2e w-consistency=%.2e reint=%.2e dH=%.2e",
        "passed" if passed else "failed",
        report.final_transversality,
        "n/a" if report.initial_transversality is None else f"{report.initial_transversality:.2e}",
        report.complementary_slackness,
        report.deviation_consistency,
        reintegration,
        variation,
    )
    return report
