import logging

import typer

from app.commands import probability, scenarios, solve

logger = logging.getLogger(__name__)

cli = typer.Typer(
    name="instanton-safety",
    help="Most likely failure paths and rare-event probabilities for small-noise SDEs.",
    no_args_is_help=True,
    add_completion=False,
)

cli.command("solve-ml")(solve.solve_ml_command)
cli.command("solve-map")(solve.solve_map_command)
cli.command("verify-pmp")(solve.verify_pmp_command)
cli.command("psafety")(probability.psafety_command)
cli.command("quasipotential-map")(probability.quasipotential_map_command)
cli.command("mc-validate")(probability.mc_validate_command)
cli.command("list-scenarios")(scenarios.list_scenarios_command)


if __name__ == "__main__":
    cli()
