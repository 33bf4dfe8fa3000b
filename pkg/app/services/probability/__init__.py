"""Probability estimates built on the instanton engine.

Provides:
- Large-deviation hitting probabilities (ldp.py)
- Posterior over initial states (posterior.py)
- Weak p-safety integration (psafety.py)
"""

from .ldp import ldt_hitting_probability, ldt_log_probability
from .posterior import evaluate_probe, posterior_logdensity
from .psafety import weak_psafety

__all__ = [
    # Large deviations
    "ldt_hitting_probability",
    "ldt_log_probability",
    # Posterior
    "evaluate_probe",
    "posterior_logdensity",
    # Weak p-safety
    "weak_psafety",
]
