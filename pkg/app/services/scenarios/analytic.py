"""Closed-form references for the one-dimensional scenarios (unit level crossing x >= L)."""

import math

from scipy.stats import norm

# Broadie-Glasserman shift for barriers monitored on a grid: zeta(1/2) / sqrt(2 pi)
DISCRETE_MONITORING_SHIFT = 0.5826


def brownian_quasipotential(y: float, threshold: float, final_time: float, sigma: float = 1.0) -> float:
    """Q(y) = (L - y)^2 / (2 sigma^2 T) for dX = sigma dW, 0 once y >= L."""
    if y >= threshold:
        return 0.0
    return (threshold - y) ** 2 / (2.0 * sigma**2 * final_time)


def ou_quasipotential(
    y: float, decay: float, threshold: float, final_time: float, sigma: float = 1.0
) -> float:
    """Fixed-T Q(y) = a (L - y e^{-aT})^2 / (sigma^2 (1 - e^{-2aT})) for b(x) = -a x."""
    if decay == 0.0:
        return brownian_quasipotential(y, threshold, final_time, sigma)
    gap = threshold - y * math.exp(-decay * final_time)
    if gap <= 0.0:
        return 0.0
    return decay * gap**2 / (sigma**2 * -math.expm1(-2.0 * decay * final_time))


def brownian_map(
    threshold: float, final_time: float, eps: float, mean: float = 0.0, variance: float = 1.0
) -> tuple[float, float]:
    """MAP initial state and objective for the Brownian case with prior N(mean, variance)."""
    if mean >= threshold:
        return mean, 0.0
    precision = 1.0 / final_time + eps / variance
    y_star = (threshold / final_time + eps * mean / variance) / precision
    objective = (threshold - y_star) ** 2 / (2.0 * final_time) + eps * (y_star - mean) ** 2 / (2.0 * variance)
    return y_star, objective


def reflection_hitting_probability(
    y: float, threshold: float, final_time: float, eps: float, sigma: float = 1.0
) -> float:
    """P(max_{t<=T} X_t >= L) = 2 (1 - Phi((L - y) / (sigma sqrt(eps T)))) for continuous monitoring."""
    if y >= threshold:
        return 1.0
    return float(2.0 * norm.sf((threshold - y) / (sigma * math.sqrt(eps * final_time))))


def discrete_hitting_probability(
    y: float, threshold: float, final_time: float, eps: float, dt: float, sigma: float = 1.0
) -> float:
    """Reflection formula with the barrier shifted out by 0.5826 sigma sqrt(eps dt)."""
    shifted = threshold + DISCRETE_MONITORING_SHIFT * sigma * math.sqrt(eps * dt)
    return reflection_hitting_probability(y, shifted, final_time, eps, sigma)


def brownian_weak_psafety(
    threshold: float, final_time: float, eps: float, mean: float = 0.0, variance: float = 1.0
) -> float:
    """int N(y; mean, variance) exp(-(L - y)^2 / (2 eps T)) over y < L, plus P(y >= L)."""
    spread = eps * final_time
    total = variance + spread
    centre = (mean * spread + threshold * variance) / total
    width = math.sqrt(variance * spread / total)
    below = (
        math.sqrt(2.0 * math.pi * spread)
        * norm.pdf(mean, loc=threshold, scale=math.sqrt(total))
        * norm.cdf((threshold - centre) / width)
    )
    return float(below + norm.sf((threshold - mean) / math.sqrt(variance)))
