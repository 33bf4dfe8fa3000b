"""Command-line entry points.

Provides:
- Shared options, run context and exit codes (common.py)
- solve-ml, solve-map and verify-pmp (solve.py)
- psafety, quasipotential-map and mc-validate (probability.py)
- list-scenarios (scenarios.py)
"""
