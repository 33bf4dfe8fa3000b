"""Monte Carlo oracle for hitting and tube probabilities.

Provides:
- Counter-based per-path random streams (streams.py)
- Vectorised Euler-Maruyama simulation (simulate.py)
- Crude, tube and importance-sampling estimators (estimators.py)
"""

from .estimators import (
    estimate_hitting_probability,
    importance_sampling_hitting,
    tube_probability,
)
from .simulate import BatchOutcome, EulerMaruyama, simulate_em
from .streams import path_generator

__all__ = [
    # Streams
    "path_generator",
    # Simulation
    "EulerMaruyama",
    "BatchOutcome",
    "simulate_em",
    # Estimators
    "estimate_hitting_probability",
    "tube_probability",
    "importance_sampling_hitting",
]
