"""Scenario discovery."""

import logging

from rich.console import Console
from rich.table import Table

from app.config import configure_logging, get_settings
from app.schemas.scenario import ScenarioFamily
from app.services.scenarios import bundled_scenarios, load_config

from .common import DebugOption, handle_errors

logger = logging.getLogger(__name__)


@handle_errors
def list_scenarios_command(debug: DebugOption = False) -> None:
    """List the built-in families and the bundled scenario files."""
    settings = get_settings()
    configure_logging(debug or settings.DEBUG)

    families = Table(title="Scenario families")
    families.add_column("Family")
    for family in ScenarioFamily:
        families.add_row(family.value)

    bundled = Table(title=f"Bundled scenarios ({settings.SCENARIO_DIR})")
    bundled.add_column("Name")
    bundled.add_column("Family")
    bundled.add_column("Description")
    for path in bundled_scenarios(settings.SCENARIO_DIR):
        config = load_config(path)
        bundled.add_row(path.stem, config.model.family, config.scenario.description)

    console = Console()
    console.print(families)
    console.print(bundled)
