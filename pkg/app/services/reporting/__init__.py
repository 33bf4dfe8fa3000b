"""Report and CSV export.

Provides:
- JSON run reports, p-safety records and solution summaries (report.py)
- Path, costate and quasi-potential CSV tables (paths_csv.py)
"""

from .paths_csv import read_path_csv, write_adjoint_csv, write_path_csv, write_quasipotential_csv
from .report import (
    ADJOINT_FILE,
    PSAFETY_FILE,
    REPORT_FILE,
    export_adjoint,
    export_solution,
    load_report,
    restore_solution,
    summarize_solution,
    write_psafety,
    write_report,
)

__all__ = [
    # Reports
    "REPORT_FILE",
    "ADJOINT_FILE",
    "PSAFETY_FILE",
    "summarize_solution",
    "export_solution",
    "export_adjoint",
    "restore_solution",
    "write_report",
    "write_psafety",
    "load_report",
    # CSV
    "write_path_csv",
    "read_path_csv",
    "write_adjoint_csv",
    "write_quasipotential_csv",
]
