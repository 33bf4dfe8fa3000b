"""Two-object Keplerian conjunction: geometry, initial velocities and orbit diagnostics.

State layout is (r1, v1, r2, v2) in metres and metres per second. Object 1 flies a
circular prograde orbit. Object 2's velocity is found by shooting so that it passes
r1(t_c) + k u at the encounter time t_c, with u the along-track direction of object 1,
and k is tuned so the deterministic closest approach inside the window equals the
requested miss distance.
"""

import logging
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar, root

logger = logging.getLogger(__name__)

POSITION_INDEX = (0, 1, 2, 6, 7, 8)
VELOCITY_INDEX = (3, 4, 5, 9, 10, 11)
PROPAGATION_RTOL = 1e-12
PROPAGATION_ATOL = 1e-6


def _radius(r: NDArray[np.float64]) -> NDArray[np.float64]:
    radius = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(radius == 0.0):
        raise ValueError("Gravity is undefined at zero radius")
    return radius


def potential_gradient(r: NDArray[np.float64], gm: float) -> NDArray[np.float64]:
    """grad U(r) = GM r / |r|^3, batched over leading axes."""
    r = np.asarray(r, dtype=float)
    return gm * r / _radius(r) ** 3


def potential_hessian(r: NDArray[np.float64], gm: float) -> NDArray[np.float64]:
    """Hessian of U at a single position: GM (I / |r|^3 - 3 r r^T / |r|^5)."""
    r = np.asarray(r, dtype=float)
    radius = float(_radius(r)[0])
    return gm * (np.eye(3) / radius**3 - 3.0 * np.outer(r, r) / radius**5)


def two_body_acceleration(positions: NDArray[np.float64], gm: float) -> NDArray[np.float64]:
    """Accelerations (a1, a2) for stacked positions (r1, r2), batched."""
    positions = np.asarray(positions, dtype=float)
    first, second = positions[..., :3], positions[..., 3:]
    return np.concatenate([-potential_gradient(first, gm), -potential_gradient(second, gm)], axis=-1)


def two_body_acceleration_jacobian(positions: NDArray[np.float64], gm: float) -> NDArray[np.float64]:
    positions = np.asarray(positions, dtype=float)
    jac = np.zeros((6, 6))
    jac[:3, :3] = -potential_hessian(positions[:3], gm)
    jac[3:, 3:] = -potential_hessian(positions[3:], gm)
    return jac


def orbital_energy(state: NDArray[np.float64], gm: float) -> NDArray[np.float64]:
    """Specific energy 1/2 |v|^2 - GM / |r| of each object, batched over states."""
    state = np.asarray(state, dtype=float)
    energies = []
    for pos, vel in ((slice(0, 3), slice(3, 6)), (slice(6, 9), slice(9, 12))):
        r, v = state[..., pos], state[..., vel]
        energies.append(0.5 * np.sum(v**2, axis=-1) - gm / np.linalg.norm(r, axis=-1))
    return np.stack(energies, axis=-1)


def circular_velocity(r: NDArray[np.float64], gm: float) -> NDArray[np.float64]:
    """Prograde circular velocity about +z at position r."""
    r = np.asarray(r, dtype=float)
    radial = r / np.linalg.norm(r)
    normal = np.array([0.0, 0.0, 1.0]) - radial[2] * radial
    normal /= np.linalg.norm(normal)
    return np.sqrt(gm / np.linalg.norm(r)) * np.cross(normal, radial)


def _kepler_rhs(gm: float):
    def rhs(_t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        r = y[:3]
        return np.concatenate([y[3:], -gm * r / np.linalg.norm(r) ** 3])

    return rhs


def propagate(
    r: NDArray[np.float64], v: NDArray[np.float64], gm: float, times: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Keplerian positions and velocities (len(times), 6) by DOP853."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    solution = solve_ivp(
        _kepler_rhs(gm),
        (0.0, float(times[-1])),
        np.concatenate([r, v]),
        method="DOP853",
        t_eval=times,
        rtol=PROPAGATION_RTOL,
        atol=PROPAGATION_ATOL,
    )
    if not solution.success:
        raise RuntimeError(f"Orbit propagation failed: {solution.message}")
    return solution.y.T


def shoot_velocity(
    r_start: NDArray[np.float64],
    target: NDArray[np.float64],
    flight_time: float,
    gm: float,
    guess: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Velocity at r_start that reaches `target` after `flight_time` (single revolution)."""
    scale = np.linalg.norm(target)

    def miss(v: NDArray[np.float64]) -> NDArray[np.float64]:
        return (propagate(r_start, v, gm, [flight_time])[-1, :3] - target) / scale

    result = root(miss, guess, method="hybr", options={"xtol": 1e-13})
    if not result.success:
        raise RuntimeError(f"Velocity shooting did not converge: {result.message}")
    return result.x


def closest_approach_of(
    state: NDArray[np.float64], gm: float, t_min: float, t_max: float, samples: int = 2001
) -> tuple[float, float]:
    """(time, distance) of minimum separation in [t_min, t_max] along the Keplerian flow."""
    state = np.asarray(state, dtype=float)
    times = np.linspace(0.0, t_max, samples)
    first = propagate(state[0:3], state[3:6], gm, times)
    second = propagate(state[6:9], state[9:12], gm, times)
    separation = np.linalg.norm(first[:, :3] - second[:, :3], axis=1)
    separation[times < t_min] = np.inf
    best = int(np.argmin(separation))
    spacing = times[1] - times[0]
    low, high = max(t_min, times[best] - spacing), min(t_max, times[best] + spacing)
    if high <= low:
        return float(times[best]), float(separation[best])

    def gap(t: float) -> float:
        a = propagate(state[0:3], state[3:6], gm, [t])[-1, :3]
        b = propagate(state[6:9], state[9:12], gm, [t])[-1, :3]
        return float(np.linalg.norm(a - b))

    refined = minimize_scalar(gap, bounds=(low, high), method="bounded", options={"xatol": 1e-3})
    if refined.fun < separation[best]:
        return float(refined.x), float(refined.fun)
    return float(times[best]), float(separation[best])


@lru_cache(maxsize=8)
def _encounter_velocity(
    r1: tuple[float, ...],
    v1: tuple[float, ...],
    r2: tuple[float, ...],
    gm: float,
    encounter_time: float,
    miss_distance: float,
    t_min: float,
    t_max: float,
) -> tuple[float, ...]:
    r1_arr, v1_arr, r2_arr = (np.asarray(a) for a in (r1, v1, r2))
    at_encounter = propagate(r1_arr, v1_arr, gm, [encounter_time])[-1]
    along_track = at_encounter[3:] / np.linalg.norm(at_encounter[3:])

    def velocity_for(offset: float) -> NDArray[np.float64]:
        target = at_encounter[:3] + offset * along_track
        return shoot_velocity(r2_arr, target, encounter_time, gm, v1_arr)

    def excess(offset: float) -> float:
        state = np.concatenate([r1_arr, v1_arr, r2_arr, velocity_for(offset)])
        return closest_approach_of(state, gm, t_min, t_max)[1] - miss_distance

    low, high = 0.0, miss_distance
    while excess(high) < 0.0:
        low, high = high, 2.0 * high
        if high > 1e3 * miss_distance:
            raise RuntimeError("Could not bracket the requested miss distance")
    offset = brentq(excess, low, high, xtol=1e-3)
    logger.info("Encounter geometry: along-track offset %.3f m at t=%.1f s", offset, encounter_time)
    return tuple(velocity_for(offset))


def encounter_velocity(
    r1: NDArray[np.float64],
    v1: NDArray[np.float64],
    r2: NDArray[np.float64],
    gm: float,
    encounter_time: float,
    miss_distance: float,
    t_min: float,
    t_max: float,
) -> NDArray[np.float64]:
    """Object 2 velocity giving a deterministic closest approach of `miss_distance` in the window."""
    return np.asarray(
        _encounter_velocity(
            tuple(map(float, r1)), tuple(map(float, v1)), tuple(map(float, r2)),
            gm, encounter_time, miss_distance, t_min, t_max,
        )
    )
