"""Most-likely (ML) and maximum-a-posteriori (MAP) hitting paths.

Both solves minimise the transcribed action, plus eps * S0(phi(0)) for MAP, subject to
the terminal constraint f(phi(T)) <= 0 with T inside a time window. The constraint is
handled by a Powell-Hestenes-Rockafellar augmented Lagrangian whose inner problems go
to L-BFGS-B; the final time enters as a bounded variable s = T.

Free-window solves first scan fixed final times across the window at a relaxed
tolerance, each scan point warm-started from the previous one, and then refine the
best scan point with s free. The terminal multiplier is re-estimated by least squares
on the stationarity condition of the final iterate, which makes the adjoint returned
with the solution consistent with the deviations it carries.

A solve is reported CONVERGED only when its maximum-principle residuals pass at
`residual_tol`; one polishing pass at a tighter gradient tolerance is tried first.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import Bounds, minimize

from app.schemas.results import SolveMode, SolveStatus
from app.schemas.solver import SolverOptions, TimeWindow

from .action import InitialDistribution, action_functional, recover_deviation
from .dynamics import DynamicsModel, flow_deterministic
from .paths import Path, TimeGrid
from .pmp import transversality_residuals
from .solution import VariationalSolution
from .transcription import Cotangents, DirectTranscription, Tape
from .unsafe_set import UnsafeSet

logger = logging.getLogger(__name__)

# Inner solves run well past gradient_tol so the recovered multiplier is accurate
INNER_TOLERANCE_FACTOR = 1e-4
INNER_FTOL = 1e-15
# Scan points only rank final times
SCAN_RELAXATION = 1e3
POLISH_FACTOR = 1e-2


class ConvergenceError(RuntimeError):
    """A solve whose value is required did not reach a usable solution."""


@dataclass(frozen=True, eq=False)
class InitialGuess:
    """Warm start: deviations on the node grid, optional phi(0), final time and alpha."""

    final_time: float
    deviations: NDArray[np.float64] | None = None
    initial_state: NDArray[np.float64] | None = None
    multiplier: float = 0.0

    @classmethod
    def from_solution(cls, solution: VariationalSolution) -> "InitialGuess":
        if solution.path is None:
            raise ValueError("Solution carries no path to warm-start from")
        return cls(
            final_time=solution.final_time,
            deviations=solution.path.deviations,
            initial_state=solution.path.initial_state,
            multiplier=solution.multiplier,
        )


@dataclass(eq=False)
class _Iterate:
    z: NDArray[np.float64]
    time_scale: float
    objective: float
    objective_grad: NDArray[np.float64]
    constraint: float
    constraint_grad: NDArray[np.float64]
    tape: Tape
    cotangents: Cotangents
    multiplier: float = 0.0
    violation: float = math.inf
    iterations: int = 0
    converged: bool = False
    free_time: bool = False
    error_code: str | None = None
    error_message: str | None = None


def straight_line_guess(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    start: NDArray[np.float64],
    final_time: float,
    nodes: int,
) -> InitialGuess:
    """Straight line to the nearest boundary point for first-order models, w = 0 otherwise."""
    zero = InitialGuess(final_time=final_time, deviations=np.zeros((nodes + 1, model.noise_dimension)))
    if model.is_mechanical or final_time <= 0.0:
        return zero
    target = unsafe_set.project_to_boundary(start)
    if target is None:
        logger.debug("Level gradient vanishes at the start; using zero deviations")
        return zero
    grid = TimeGrid.uniform(final_time, nodes)
    states = start + (grid.times / final_time)[:, None] * (target - start)
    line = recover_deviation(Path(grid=grid, states=states), model)
    return InitialGuess(final_time=final_time, deviations=line.deviations)


def _resample(deviations: NDArray[np.float64], nodes: int) -> NDArray[np.float64]:
    deviations = np.atleast_2d(np.asarray(deviations, dtype=float))
    if deviations.shape[0] == nodes + 1:
        return deviations.copy()
    source = np.linspace(0.0, 1.0, deviations.shape[0])
    target = np.linspace(0.0, 1.0, nodes + 1)
    return np.column_stack([np.interp(target, source, col) for col in deviations.T])


class _ConstrainedSolve:
    """One ML or MAP problem on a fixed transcription."""

    def __init__(
        self,
        mode: SolveMode,
        model: DynamicsModel,
        unsafe_set: UnsafeSet,
        window: TimeWindow,
        options: SolverOptions,
        start: NDArray[np.float64] | None = None,
        dist: InitialDistribution | None = None,
        eps: float | None = None,
    ) -> None:
        self.mode = mode
        self.model = model
        self.unsafe_set = unsafe_set
        self.window = window
        self.options = options
        self.dist = dist
        self.eps = eps
        self.start = start if mode == SolveMode.ML else dist.mean
        self.transcription = DirectTranscription(model, options.nodes)
        self.time_unit = window.t_max
        self.level_scale = 1.0 + abs(float(unsafe_set.level(self.start)))
        self._nw = (options.nodes + 1) * model.noise_dimension
        self._nx = model.dimension if mode == SolveMode.MAP else 0

    # Variable layout: z = [v (scaled deviations), xi (MAP only), u = s / t_max (free time only)]
    def _pack(self, w: NDArray[np.float64], xi: NDArray[np.float64] | None, s: float | None) -> NDArray[np.float64]:
        parts = [self.transcription.scale_deviations(w).ravel()]
        if self._nx:
            parts.append(np.asarray(xi, dtype=float))
        if s is not None:
            parts.append(np.array([s / self.time_unit]))
        return np.concatenate(parts)

    def _unpack(
        self, z: NDArray[np.float64], fixed_time: float | None
    ) -> tuple[NDArray[np.float64], NDArray[np.float64] | None, float]:
        tr = self.transcription
        w = tr.unscale_deviations(z[: self._nw].reshape(tr.node_count, self.model.noise_dimension))
        xi = z[self._nw : self._nw + self._nx] if self._nx else None
        s = fixed_time if fixed_time is not None else float(z[-1]) * self.time_unit
        return w, xi, s

    def _initial_state(self, xi: NDArray[np.float64] | None) -> NDArray[np.float64]:
        return self.start if xi is None else self.dist.unwhiten(xi)

    def _guess(self, it: _Iterate) -> InitialGuess:
        w, xi, s = self._unpack(it.z, None if it.free_time else it.time_scale)
        return InitialGuess(
            final_time=s,
            deviations=w,
            initial_state=None if xi is None else self.dist.unwhiten(xi),
            multiplier=it.multiplier / self.level_scale,
        )

    def _slackness(self, mu: float, constraint: float) -> float:
        """|alpha f| / (1 + alpha) for the scaled multiplier mu and constraint f / level_scale."""
        return abs(mu * constraint) / (1.0 + mu / self.level_scale)

    def _evaluate(self, z: NDArray[np.float64], fixed_time: float | None) -> _Iterate:
        tr = self.transcription
        w, xi, s = self._unpack(z, fixed_time)
        with np.errstate(over="raise", invalid="raise"):
            tape = tr.forward(self._initial_state(xi), w, s)
        x_final = tape.states[-1]
        constraint = float(self.unsafe_set.level(x_final)) / self.level_scale
        cot = tr.backward(tape, self.unsafe_set.gradient(x_final) / self.level_scale)

        action = tr.action(w, s)
        objective = action
        grad_j = [(tr.action_gradient(w, s) / tr.sqrt_weights[:, None]).ravel()]
        grad_c = [(cot.deviations / tr.sqrt_weights[:, None]).ravel()]
        if xi is not None:
            objective += 0.5 * self.eps * float(xi @ xi)
            grad_j.append(self.eps * xi)
            grad_c.append(self.dist.cholesky.T @ cot.initial_state)
        if fixed_time is None:
            grad_j.append(np.array([action / s * self.time_unit]))
            grad_c.append(np.array([cot.time_scale * self.time_unit]))

        return _Iterate(
            z=z,
            time_scale=s,
            objective=objective,
            objective_grad=np.concatenate(grad_j),
            constraint=constraint,
            constraint_grad=np.concatenate(grad_c),
            tape=tape,
            cotangents=cot,
            free_time=fixed_time is None,
        )

    def _bounds(self, size: int) -> Bounds:
        lower = np.full(size, -np.inf)
        upper = np.full(size, np.inf)
        lower[-1] = max(self.window.t_min, 1e-6 * self.window.t_max) / self.time_unit
        upper[-1] = 1.0
        return Bounds(lower, upper)

    def run(
        self, guess: InitialGuess, fixed_time: float | None, options: SolverOptions | None = None
    ) -> _Iterate:
        """Augmented Lagrangian loop from `guess`; fixed_time=None frees s inside the window."""
        opts = options or self.options
        w0 = _resample(guess.deviations, opts.nodes) if guess.deviations is not None else np.zeros(
            (opts.nodes + 1, self.model.noise_dimension)
        )
        xi0 = None
        if self._nx:
            xi0 = np.zeros(self._nx) if guess.initial_state is None else self.dist.whiten(guess.initial_state)
        s0 = None
        if fixed_time is None:
            s0 = float(np.clip(guess.final_time, max(self.window.t_min, 1e-6 * self.window.t_max), self.window.t_max))
        z = self._pack(w0, xi0, s0)
        bounds = self._bounds(z.size) if fixed_time is None else None

        try:
            current = self._evaluate(z, fixed_time)
        except FloatingPointError as exc:
            return self._diverged(z, fixed_time, str(exc))

        mu, rho = max(0.0, guess.multiplier * self.level_scale), opts.initial_penalty
        previous = math.inf
        iterations = 0
        scale = max(1.0, float(np.max(np.abs(current.objective_grad))))
        inner = {
            "maxiter": opts.max_iterations,
            "ftol": INNER_FTOL,
            "gtol": opts.gradient_tol * INNER_TOLERANCE_FACTOR * scale,
            "maxcor": 20,
        }

        for outer in range(1, opts.max_outer_iterations + 1):

            def merit(x: NDArray[np.float64], mu: float = mu, rho: float = rho) -> tuple[float, NDArray[np.float64]]:
                try:
                    it = self._evaluate(x, fixed_time)
                except FloatingPointError:
                    return 1e300, np.zeros_like(x)
                shifted = mu + rho * it.constraint
                if shifted > 0.0:
                    value = it.objective + (shifted**2 - mu**2) / (2.0 * rho)
                    return value, it.objective_grad + shifted * it.constraint_grad
                return it.objective - mu**2 / (2.0 * rho), it.objective_grad

            result = minimize(merit, z, jac=True, method="L-BFGS-B", bounds=bounds, options=inner)
            iterations += int(result.nit)
            z = result.x
            try:
                current = self._evaluate(z, fixed_time)
            except FloatingPointError as exc:
                return self._diverged(z, fixed_time, str(exc))

            violation = abs(max(current.constraint, -mu / rho))
            mu = max(0.0, mu + rho * current.constraint)
            slackness = self._slackness(mu, current.constraint)
            logger.debug(
                "Outer %d: J=%.10g c=%.3e alpha*f=%.3e mu=%.6g rho=%.1e inner=%d (%s)",
                outer, current.objective, current.constraint, slackness, mu, rho, result.nit, result.message,
            )
            if violation <= opts.constraint_tol and slackness <= opts.constraint_tol:
                current.converged = True
                break
            if current.constraint > opts.constraint_tol and not np.any(current.constraint_grad):
                current.error_code = "DEGENERATE_CONSTRAINT"
                current.error_message = "Level-function gradient vanishes at the terminal state"
                break
            if max(violation, slackness) > 0.25 * previous:
                if rho >= opts.max_penalty:
                    break
                rho = min(rho * opts.penalty_growth, opts.max_penalty)
            previous = max(violation, slackness)

        current.iterations = iterations
        current.violation = max(current.constraint, 0.0)
        current.multiplier = self._stationary_multiplier(current, mu)
        if not current.converged and current.error_code is None:
            current.error_code = "NOT_CONVERGED"
            current.error_message = (
                f"Constraint violation {current.violation:.3e} after "
                f"{opts.max_outer_iterations} outer iterations"
            )
        return current

    def _diverged(self, z: NDArray[np.float64], fixed_time: float | None, message: str) -> _Iterate:
        tr = self.transcription
        n = self.model.dimension
        empty = Tape(
            states=np.zeros((0, n)),
            stage_points=np.zeros((0, 4, n)),
            stage_rates=np.zeros((0, 4, n)),
            steps=np.zeros(0),
        )
        cot = Cotangents(np.zeros(n), np.zeros((tr.node_count, self.model.noise_dimension)), 0.0, np.zeros((0, n)))
        _, _, s = self._unpack(z, fixed_time)
        return _Iterate(
            z=z,
            time_scale=s,
            objective=math.inf,
            objective_grad=np.zeros_like(z),
            constraint=math.inf,
            constraint_grad=np.zeros_like(z),
            tape=empty,
            cotangents=cot,
            error_code="DIVERGED",
            error_message=message,
        )

    def _stationary_multiplier(self, it: _Iterate, fallback: float) -> float:
        """Least-squares mu in grad J + mu grad c = 0 over the unconstrained variables."""
        if it.constraint < -self.options.constraint_tol:
            return 0.0
        mask = np.ones(it.z.size, dtype=bool)
        if it.free_time and not self.window.is_interior(it.time_scale):
            mask[-1] = False
        gc = it.constraint_grad[mask]
        denom = float(gc @ gc)
        if denom == 0.0:
            return max(fallback, 0.0)
        return max(0.0, -float(it.objective_grad[mask] @ gc) / denom)

    def stationarity(self, it: _Iterate) -> float:
        mask = np.ones(it.z.size, dtype=bool)
        if it.free_time and not self.window.is_interior(it.time_scale):
            mask[-1] = False
        residual = it.objective_grad[mask] + it.multiplier * it.constraint_grad[mask]
        return float(np.max(np.abs(residual))) if residual.size else 0.0

    def finalize(self, it: _Iterate, status: SolveStatus | None = None) -> VariationalSolution:
        tr = self.transcription
        if it.error_code == "DIVERGED":
            return VariationalSolution.failure(self.mode, self.window, it.error_code, it.error_message or "")

        w, xi, s = self._unpack(it.z, it.time_scale if not it.free_time else None)
        path = tr.path(it.tape, w, s)
        adjoint = -it.multiplier * it.cotangents.node_states
        level = float(self.unsafe_set.level(path.final_state))
        alpha = it.multiplier / self.level_scale
        if status is None:
            status = SolveStatus.CONVERGED if it.converged else SolveStatus.MAX_ITERATIONS
            if it.error_code == "DEGENERATE_CONSTRAINT":
                status = SolveStatus.INFEASIBLE

        initial_cost = self.dist.cost(path.initial_state) if self.dist is not None else None
        return VariationalSolution(
            mode=self.mode,
            status=status,
            window=self.window,
            path=path,
            adjoint=adjoint,
            multiplier=alpha,
            action=action_functional(path),
            initial_cost=initial_cost,
            eps=self.eps,
            constraint_value=level,
            residuals={
                "constraint_violation": max(level, 0.0) / self.level_scale,
                "complementarity": abs(alpha * level) / (1.0 + alpha),
                "stationarity": self.stationarity(it),
            },
            iterations=it.iterations,
            error_code=None if status == SolveStatus.CONVERGED else it.error_code,
            error_message=None if status == SolveStatus.CONVERGED else it.error_message,
        )

    def _check(self, solution: VariationalSolution) -> bool:
        """Record the maximum-principle residuals on `solution`; True when they pass."""
        report = transversality_residuals(
            self.model, self.unsafe_set, solution, self.dist, self.options.residual_tol
        )
        solution.residuals.update(
            final_transversality=report.final_transversality,
            deviation_consistency=report.deviation_consistency,
        )
        if report.initial_transversality is not None:
            solution.residuals["initial_transversality"] = report.initial_transversality
        if report.final_time_interior:
            solution.residuals["terminal_hamiltonian"] = report.terminal_hamiltonian
        return report.passed

    def certify(self, it: _Iterate) -> VariationalSolution:
        """Finalize `it`; CONVERGED only if the maximum-principle residuals pass, polishing once."""
        solution = self.finalize(it)
        if solution.status != SolveStatus.CONVERGED or self._check(solution):
            return solution

        logger.info("Residuals above %g after convergence; polishing", self.options.residual_tol)
        tight = self.options.model_copy(update={"gradient_tol": self.options.gradient_tol * POLISH_FACTOR})
        polished = self.finalize(self.run(self._guess(it), None if it.free_time else it.time_scale, tight))
        if polished.status == SolveStatus.CONVERGED:
            if self._check(polished):
                return polished
            solution = polished

        failing = ", ".join(
            f"{name}={value:.2e}"
            for name, value in solution.residuals.items()
            if name not in ("constraint_violation", "stationarity") and value > self.options.residual_tol
        )
        solution.status = SolveStatus.MAX_ITERATIONS
        solution.error_code = "RESIDUALS_ABOVE_TOLERANCE"
        solution.error_message = f"Maximum-principle residuals above {self.options.residual_tol:g}: {failing}"
        return solution

    def trivial(self) -> VariationalSolution | None:
        """Zero-cost solution when the unperturbed flow reaches D inside the window."""
        nodes = self.options.nodes
        start = self.start
        if self.unsafe_set.contains(start):
            hit_time = self.window.t_min
        else:
            flow = flow_deterministic(self.model, start, self.window.t_max, max(nodes, 2))
            levels = np.atleast_1d(self.unsafe_set.level(flow.states))
            inside = (levels <= 0.0) & (flow.times >= self.window.t_min * (1.0 - 1e-12))
            if not np.any(inside):
                return None
            hit_time = float(flow.times[int(np.argmax(inside))])

        if hit_time == 0.0:
            path = Path(
                grid=TimeGrid(np.zeros(1)),
                states=start[None, :],
                deviations=np.zeros((1, self.model.noise_dimension)),
            )
        else:
            path = flow_deterministic(self.model, start, hit_time, max(nodes, 2))
        logger.info("Deterministic flow reaches the unsafe set at T=%.6g; zero-cost solution", hit_time)
        return VariationalSolution(
            mode=self.mode,
            status=SolveStatus.TRIVIAL,
            window=self.window,
            path=path,
            adjoint=np.zeros_like(path.states),
            multiplier=0.0,
            action=0.0,
            initial_cost=0.0 if self.dist is not None else None,
            eps=self.eps,
            constraint_value=float(self.unsafe_set.level(path.final_state)),
            residuals={"constraint_violation": 0.0, "complementarity": 0.0, "stationarity": 0.0},
        )

    def solve(self, guess: InitialGuess | None) -> VariationalSolution:
        trivial = self.trivial()
        if trivial is not None:
            return trivial

        if self.window.is_fixed:
            final_time = self.window.t_max
            start_guess = guess or straight_line_guess(
                self.model, self.unsafe_set, self.start, final_time, self.options.nodes
            )
            return self.certify(self.run(start_guess, fixed_time=final_time))

        if guess is not None:
            return self.certify(self.run(guess, fixed_time=None))

        scan = [t for t in np.linspace(self.window.t_min, self.window.t_max, self.options.scan_points) if t > 0.0]
        if not scan:
            scan = [self.window.t_max]
        scan_options = self.options.model_copy(
            update={
                "gradient_tol": self.options.gradient_tol * SCAN_RELAXATION,
                "constraint_tol": self.options.constraint_tol * SCAN_RELAXATION,
            }
        )
        best: _Iterate | None = None
        attempts: list[_Iterate] = []
        warm: InitialGuess | None = None
        for final_time in scan:
            start_guess = warm or straight_line_guess(
                self.model, self.unsafe_set, self.start, float(final_time), self.options.nodes
            )
            it = self.run(start_guess, fixed_time=float(final_time), options=scan_options)
            attempts.append(it)
            logger.debug(
                "Scan T=%.6g: J=%.10g converged=%s", final_time, it.objective, it.converged
            )
            if it.converged:
                warm = self._guess(it)
                if best is None or it.objective < best.objective:
                    best = it

        if best is None:
            closest = min(attempts, key=lambda a: a.constraint)
            return self.finalize(closest)

        refined = self.run(self._guess(best), fixed_time=None)
        if refined.converged:
            return self.certify(refined)
        logger.warning("Final-time refinement did not converge (%s); keeping best scan point", refined.error_message)
        best.error_code = "TIME_REFINEMENT_FAILED"
        best.error_message = refined.error_message
        return self.finalize(best, status=SolveStatus.MAX_ITERATIONS)


def solve_ml(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    y: NDArray[np.float64],
    window: TimeWindow,
    options: SolverOptions | None = None,
    guess: InitialGuess | None = None,
) -> VariationalSolution:
    """Most likely path from the fixed initial state y into the unsafe set.

    The objective value is the quasi-potential Q(y).

    Args:
        model: Drift and diffusion of the perturbed system.
        unsafe_set: Level-set description of D.
        y: Initial state, shape (n,).
        window: Bounds on the hitting time; a fixed window pins T.
        options: Transcription and optimizer settings; defaults to SolverOptions().
        guess: Warm start; skips the final-time scan on free windows.

    Returns:
        VariationalSolution with status TRIVIAL when the unperturbed flow reaches D
        inside the window. Non-converged solves keep their last iterate.

    Raises:
        ValueError: If y does not match the model dimension.
    """
    options = options or SolverOptions()
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.dimension,):
        raise ValueError(f"Initial state has shape {y.shape}, model expects ({model.dimension},)")

    logger.info("ML solve from y=%s over T in [%g, %g]", np.array2string(y, precision=4), window.t_min, window.t_max)
    problem = _ConstrainedSolve(SolveMode.ML, model, unsafe_set, window, options, start=y)
    solution = problem.solve(guess)
    _log_outcome(solution)
    return solution


def solve_map(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    window: TimeWindow,
    options: SolverOptions | None = None,
    guess: InitialGuess | None = None,
) -> VariationalSolution:
    """MAP path with a free initial state weighted by eps * S0.

    Args:
        model: Drift and diffusion of the perturbed system.
        unsafe_set: Level-set description of D.
        dist: Gaussian prior over the initial state; its mean seeds the search.
        eps: Noise level, > 0.
        window: Bounds on the hitting time.
        options: Transcription and optimizer settings.
        guess: Warm start, phi(0) included.

    Returns:
        VariationalSolution whose objective is J = S_T + eps * S0(phi(0)).
    """
    options = options or SolverOptions()
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if dist.dimension != model.dimension:
        raise ValueError(f"Prior has dimension {dist.dimension}, model expects {model.dimension}")

    logger.info("MAP solve with eps=%g over T in [%g, %g]", eps, window.t_min, window.t_max)
    problem = _ConstrainedSolve(SolveMode.MAP, model, unsafe_set, window, options, dist=dist, eps=eps)
    solution = problem.solve(guess)
    _log_outcome(solution)
    return solution


def quasipotential(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    y: NDArray[np.float64],
    window: TimeWindow,
    options: SolverOptions | None = None,
    guess: InitialGuess | None = None,
) -> float:
    """Q(y); 0 inside D. Raises ConvergenceError when the ML solve fails."""
    solution = solve_ml(model, unsafe_set, y, window, options, guess)
    if not solution.success:
        raise ConvergenceError(f"Quasi-potential solve failed ({solution.error_code}): {solution.error_message}")
    return solution.action


def _log_outcome(solution: VariationalSolution) -> None:
    if solution.success:
        logger.info(
            "%s solve %s: objective=%.10g T=%.6g alpha=%.6g",
            solution.mode.value.upper(), solution.status.value, solution.objective,
            solution.final_time, solution.multiplier,
        )
    else:
        logger.warning(
            "%s solve %s (%s): %s",
            solution.mode.value.upper(), solution.status.value, solution.error_code, solution.error_message,
        )
