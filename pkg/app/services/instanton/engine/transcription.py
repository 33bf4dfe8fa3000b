"""Direct transcription of controlled paths phi' = b(phi) + sigma w.

Decision variables live on a fixed unit grid tau_0 = 0 < ... < tau_N = 1 and physical
time is t = s * tau. Deviations are node values w_0..w_N, linearly interpolated inside
each RK4 step, and the discrete action is the exact integral of that interpolant. With
this pairing the stationarity condition in w_k matches the RK4 stage weights to second
order at every node, endpoints included. Gradients come from reverse accumulation
through the RK4 stages.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dynamics import DynamicsModel
from .paths import Path, TimeGrid


@dataclass(frozen=True, eq=False)
class Tape:
    """Forward sweep record needed by the reverse sweep."""

    states: NDArray[np.float64]  # (N+1, n)
    stage_points: NDArray[np.float64]  # (N, 4, n)
    stage_rates: NDArray[np.float64]  # (N, 4, n)
    steps: NDArray[np.float64]  # (N,) physical step sizes


@dataclass(frozen=True, eq=False)
class Cotangents:
    """Reverse sweep output for a terminal cotangent x_bar_N."""

    initial_state: NDArray[np.float64]  # (n,)
    deviations: NDArray[np.float64]  # (N+1, k)
    time_scale: float
    node_states: NDArray[np.float64]  # (N+1, n), adjoint of every x_k


class DirectTranscription:
    """Forward/reverse RK4 sweeps for a fixed model and grid size."""

    def __init__(self, model: DynamicsModel, steps: int) -> None:
        if steps < 1:
            raise ValueError(f"Transcription needs at least one step, got {steps}")
        self.model = model
        self.steps = steps
        self.unit_times = np.linspace(0.0, 1.0, steps + 1)
        self.unit_spacing = np.diff(self.unit_times)
        weights = np.zeros(steps + 1)
        weights[:-1] += 0.5 * self.unit_spacing
        weights[1:] += 0.5 * self.unit_spacing
        self.weights = weights
        self.sqrt_weights = np.sqrt(weights)
        self._g = model.diffusion_matrix

    @property
    def node_count(self) -> int:
        return self.steps + 1

    # Scaling by the lumped weights, v_k = sqrt(c_k) w_k, keeps the Hessian near s * I
    def scale_deviations(self, w: NDArray[np.float64]) -> NDArray[np.float64]:
        return w * self.sqrt_weights[:, None]

    def unscale_deviations(self, v: NDArray[np.float64]) -> NDArray[np.float64]:
        return v / self.sqrt_weights[:, None]

    def action(self, w: NDArray[np.float64], time_scale: float) -> float:
        """(s/2) int |w|^2 dtau for the piecewise-linear w."""
        left, right = w[:-1], w[1:]
        segment = np.sum(left**2 + left * right + right**2, axis=1)
        return 0.5 * time_scale * float(self.unit_spacing @ segment) / 3.0

    def action_gradient(self, w: NDArray[np.float64], time_scale: float) -> NDArray[np.float64]:
        """d action / d w_k; the time-scale derivative is action / s."""
        left, right = w[:-1], w[1:]
        coeff = (time_scale / 6.0) * self.unit_spacing[:, None]
        grad = np.zeros_like(w)
        grad[:-1] += coeff * (2.0 * left + right)
        grad[1:] += coeff * (left + 2.0 * right)
        return grad

    def grid(self, time_scale: float) -> TimeGrid:
        return TimeGrid(time_scale * self.unit_times)

    def _rate(self, x: NDArray[np.float64], w: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.model.drift(x) + self._g @ w

    def forward(self, x0: NDArray[np.float64], w: NDArray[np.float64], time_scale: float) -> Tape:
        n = self.model.dimension
        states = np.empty((self.node_count, n))
        points = np.empty((self.steps, 4, n))
        rates = np.empty((self.steps, 4, n))
        step_sizes = time_scale * self.unit_spacing
        x = np.asarray(x0, dtype=float)
        states[0] = x
        for k in range(self.steps):
            h = step_sizes[k]
            w_mid = 0.5 * (w[k] + w[k + 1])
            points[k, 0] = x
            rates[k, 0] = self._rate(x, w[k])
            points[k, 1] = x + 0.5 * h * rates[k, 0]
            rates[k, 1] = self._rate(points[k, 1], w_mid)
            points[k, 2] = x + 0.5 * h * rates[k, 1]
            rates[k, 2] = self._rate(points[k, 2], w_mid)
            points[k, 3] = x + h * rates[k, 2]
            rates[k, 3] = self._rate(points[k, 3], w[k + 1])
            x = x + (h / 6.0) * (rates[k, 0] + 2.0 * rates[k, 1] + 2.0 * rates[k, 2] + rates[k, 3])
            if not np.all(np.isfinite(x)):
                raise FloatingPointError(f"Controlled path diverged at step {k + 1}")
            states[k + 1] = x
        return Tape(states=states, stage_points=points, stage_rates=rates, steps=step_sizes)

    def backward(self, tape: Tape, terminal_cotangent: NDArray[np.float64]) -> Cotangents:
        """Pull a cotangent on x_N back to x_0, every w_k, the time scale and every x_k."""
        k_dim = self.model.noise_dimension
        g_t = self._g.T
        w_bar = np.zeros((self.node_count, k_dim))
        node_bar = np.empty((self.node_count, self.model.dimension))
        s_bar = 0.0
        x_bar = np.asarray(terminal_cotangent, dtype=float).copy()
        node_bar[-1] = x_bar

        for k in range(self.steps - 1, -1, -1):
            h = tape.steps[k]
            pts = tape.stage_points[k]
            rts = tape.stage_rates[k]
            out_bar = x_bar
            h_bar = out_bar @ (rts[0] + 2.0 * rts[1] + 2.0 * rts[2] + rts[3]) / 6.0
            r_bar = [h / 6.0 * out_bar, h / 3.0 * out_bar, h / 3.0 * out_bar, h / 6.0 * out_bar]
            x_bar = out_bar.copy()

            # Stage 4 evaluated at x + h * r3
            p4_bar = self.model.drift_jacobian(pts[3]).T @ r_bar[3]
            w_end_bar = g_t @ r_bar[3]
            x_bar += p4_bar
            r_bar[2] = r_bar[2] + h * p4_bar
            h_bar += p4_bar @ rts[2]

            # Stage 3 evaluated at x + h/2 * r2
            p3_bar = self.model.drift_jacobian(pts[2]).T @ r_bar[2]
            w_mid_bar = g_t @ r_bar[2]
            x_bar += p3_bar
            r_bar[1] = r_bar[1] + 0.5 * h * p3_bar
            h_bar += 0.5 * (p3_bar @ rts[1])

            # Stage 2 evaluated at x + h/2 * r1
            p2_bar = self.model.drift_jacobian(pts[1]).T @ r_bar[1]
            w_mid_bar = w_mid_bar + g_t @ r_bar[1]
            x_bar += p2_bar
            r_bar[0] = r_bar[0] + 0.5 * h * p2_bar
            h_bar += 0.5 * (p2_bar @ rts[0])

            # Stage 1 evaluated at x
            x_bar += self.model.drift_jacobian(pts[0]).T @ r_bar[0]
            w_start_bar = g_t @ r_bar[0]

            w_bar[k] += w_start_bar + 0.5 * w_mid_bar
            w_bar[k + 1] += w_end_bar + 0.5 * w_mid_bar
            s_bar += h_bar * self.unit_spacing[k]
            node_bar[k] = x_bar

        return Cotangents(
            initial_state=x_bar,
            deviations=w_bar,
            time_scale=float(s_bar),
            node_states=node_bar,
        )

    def path(self, tape: Tape, w: NDArray[np.float64], time_scale: float) -> Path:
        return Path(grid=self.grid(time_scale), states=tape.states, deviations=np.array(w, copy=True))
