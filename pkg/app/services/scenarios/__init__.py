"""Scenario catalogue and configuration loading.

Provides:
- Built-in problem families (catalog.py)
- Closed-form references for the 1-D families (analytic.py)
- Two-body conjunction geometry (conjunction.py)
- TOML loading and fingerprinting (loader.py)
"""

from .catalog import (
    Scenario,
    brownian_1d,
    closest_approach,
    double_target,
    linear_1d,
    two_body_conjunction,
)
from .conjunction import orbital_energy, potential_gradient, potential_hessian
from .loader import (
    build_scenario,
    bundled_scenarios,
    config_hash,
    load_config,
    load_scenario,
    resolve_scenario_path,
)

__all__ = [
    # Catalogue
    "Scenario",
    "brownian_1d",
    "linear_1d",
    "double_target",
    "two_body_conjunction",
    "closest_approach",
    # Orbit helpers
    "orbital_energy",
    "potential_gradient",
    "potential_hessian",
    # Loading
    "load_config",
    "load_scenario",
    "build_scenario",
    "config_hash",
    "resolve_scenario_path",
    "bundled_scenarios",
]
