"""Large-deviation estimates of hitting probabilities."""

import math


def ldt_log_probability(quasipotential: float, eps: float) -> float:
    """log P ~ -Q / eps."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if quasipotential < 0.0:
        raise ValueError(f"Quasi-potential must be non-negative, got {quasipotential}")
    return -quasipotential / eps


def ldt_hitting_probability(quasipotential: float, eps: float) -> float:
    """Leading-order estimate P ~ exp(-Q / eps), without prefactor."""
    return math.exp(ldt_log_probability(quasipotential, eps))
