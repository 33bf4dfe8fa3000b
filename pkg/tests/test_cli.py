"""Tests for the command-line surface.

Critical scenarios tested:
- solve-ml writes report.json and path_ml.csv with the expected quasi-potential
- solve-map followed by verify-pmp --from passes the maximum-principle check
- solve-map and verify-pmp also write adjoint.csv
- Configuration problems exit with code 1, non-convergence with code 2, engine errors with 3
- Multi-start exports every distinct path
- psafety writes psafety.json; quasipotential-map writes quasipotential.csv
- mc-validate reports crude, importance-sampling and tube estimates, identically for one seed
"""

import pytest
from typer.testing import CliRunner

from app.main import cli
from app.schemas.report import PSafetyReport
from app.services.reporting import load_report

from .conftest import BROWNIAN_Q, MAP_INITIAL_STATE, SCENARIO_DIR

runner = CliRunner()


def scenario_path(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.toml")


def edited_scenario(tmp_path, name: str, old: str, new: str) -> str:
    """Copy a bundled scenario with one line replaced."""
    text = (SCENARIO_DIR / f"{name}.toml").read_text(encoding="utf-8")
    assert old in text
    path = tmp_path / f"{name}_edited.toml"
    path.write_text(text.replace(old, new), encoding="utf-8")
    return str(path)


class TestSolveCommands:
    """Test solve-ml, solve-map and verify-pmp."""

    def test_solve_ml(self, tmp_path):
        result = runner.invoke(
            cli, ["solve-ml", "--scenario", scenario_path("brownian1d"), "--nodes", "50", "--out", str(tmp_path)]
        )
        assert result.exit_code == 0, result.output
        report = load_report(tmp_path)
        assert report.command == "solve-ml"
        assert report.ldp["quasipotential"] == pytest.approx(BROWNIAN_Q, abs=1e-4)
        assert report.reference["quasipotential"] == pytest.approx(BROWNIAN_Q)
        assert (tmp_path / "path_ml.csv").exists()
        assert "timings" in (tmp_path / "report.json").read_text(encoding="utf-8")

    def test_solve_map_then_verify(self, tmp_path):
        solve_dir, verify_dir = tmp_path / "solve", tmp_path / "verify"
        scenario = scenario_path("brownian1d")
        result = runner.invoke(cli, ["solve-map", "-s", scenario, "--nodes", "50", "--out", str(solve_dir)])
        assert result.exit_code == 0, result.output
        report = load_report(solve_dir)
        assert report.solutions[0].initial_state[0] == pytest.approx(MAP_INITIAL_STATE, abs=1e-4)
        assert report.residuals is not None
        assert (solve_dir / "path_map.csv").exists()
        assert (solve_dir / "adjoint.csv").exists()

        result = runner.invoke(
            cli,
            ["verify-pmp", "-s", scenario, "--nodes", "50", "--from", str(solve_dir), "--out", str(verify_dir)],
        )
        assert result.exit_code == 0, result.output
        assert load_report(verify_dir).residuals.passed
        header = (verify_dir / "adjoint.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "t,lam_0,lam_reintegrated_0"

    def test_verify_from_other_config_exits_1(self, tmp_path):
        solve_dir = tmp_path / "solve"
        scenario = scenario_path("brownian1d")
        runner.invoke(cli, ["solve-map", "-s", scenario, "--nodes", "50", "--out", str(solve_dir)])
        result = runner.invoke(
            cli,
            ["verify-pmp", "-s", scenario, "--nodes", "60", "--from", str(solve_dir), "--out", str(tmp_path / "v")],
        )
        assert result.exit_code == 1

    def test_multi_start_exports_both_paths(self, tmp_path):
        result = runner.invoke(cli, ["solve-ml", "-s", scenario_path("double_target"), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "path_ml.csv").exists()
        assert (tmp_path / "path_ml_1.csv").exists()
        assert len(load_report(tmp_path).solutions) == 2


class TestExitCodes:
    """Test the exit-code mapping."""

    def test_missing_scenario(self, tmp_path):
        result = runner.invoke(cli, ["solve-ml", "-s", "no_such_scenario", "--out", str(tmp_path)])
        assert result.exit_code == 1

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[scenario\nname = ", encoding="utf-8")
        result = runner.invoke(cli, ["solve-ml", "-s", str(path), "--out", str(tmp_path)])
        assert result.exit_code == 1

    def test_unknown_key(self, tmp_path):
        path = edited_scenario(tmp_path, "brownian1d", "sigma = 1.0", "sigma = 1.0\nkappa = 2.0")
        result = runner.invoke(cli, ["solve-ml", "-s", path, "--out", str(tmp_path)])
        assert result.exit_code == 1

    def test_verify_from_empty_directory_exits_1(self, tmp_path):
        result = runner.invoke(
            cli,
            ["verify-pmp", "-s", scenario_path("brownian1d"), "--from", str(tmp_path / "missing"), "--out", str(tmp_path)],
        )
        assert result.exit_code == 1

    def test_engine_value_error_exits_3(self, tmp_path, monkeypatch):
        """Only configuration problems map to 1; a guard tripping inside a solve is internal."""

        def broken_solve(*args, **kwargs):
            raise ValueError("Deviation array has 3 rows for a grid of 4 nodes")

        monkeypatch.setattr("app.commands.solve.solve_ml", broken_solve)
        result = runner.invoke(cli, ["solve-ml", "-s", scenario_path("brownian1d"), "--out", str(tmp_path)])
        assert result.exit_code == 3

    def test_invalid_tolerance_override_exits_1(self, tmp_path):
        result = runner.invoke(
            cli, ["solve-ml", "-s", scenario_path("brownian1d"), "--tol=-1", "--out", str(tmp_path)]
        )
        assert result.exit_code == 1

    def test_single_start_on_symmetric_target_exits_2(self, tmp_path):
        path = edited_scenario(tmp_path, "double_target", "n_starts = 5", "n_starts = 1")
        result = runner.invoke(cli, ["solve-ml", "-s", path, "--out", str(tmp_path)])
        assert result.exit_code == 2


class TestOtherCommands:
    """Test list-scenarios, psafety, quasipotential-map and mc-validate."""

    def test_list_scenarios(self, monkeypatch):
        monkeypatch.chdir(SCENARIO_DIR.parent)
        result = runner.invoke(cli, ["list-scenarios"])
        assert result.exit_code == 0, result.output
        assert "brownian1d" in result.output
        assert "two_body_conjunction" in result.output

    def test_psafety_writes_its_record(self, tmp_path):
        path = edited_scenario(tmp_path, "brownian1d", "quadrature_intervals = 128", "quadrature_intervals = 32")
        result = runner.invoke(cli, ["psafety", "-s", path, "--nodes", "20", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        record = PSafetyReport.model_validate_json((tmp_path / "psafety.json").read_text(encoding="utf-8"))
        assert record.result.estimate == pytest.approx(0.277, abs=1e-2)
        assert record.config_hash == load_report(tmp_path).config_hash
        assert load_report(tmp_path).psafety == record.result

    def test_quasipotential_map(self, tmp_path):
        path = edited_scenario(tmp_path, "brownian1d", "probe_nodes = 40", "probe_nodes = 8")
        result = runner.invoke(cli, ["quasipotential-map", "-s", path, "--nodes", "20", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "quasipotential.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 + 9
        report = load_report(tmp_path)
        assert len(report.posterior) == 9
        assert all(e.inside_unsafe_set == (e.probe[0] >= 1.0) for e in report.posterior)

    @pytest.mark.slow
    def test_mc_validate(self, tmp_path):
        path = edited_scenario(tmp_path, "brownian1d", "dt = 1e-3\npaths = 100000", "dt = 1e-2\npaths = 2000")
        result = runner.invoke(cli, ["mc-validate", "-s", path, "--nodes", "50", "--seed", "3", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        report = load_report(tmp_path)
        assert set(report.estimates) == {"crude", "importance", "tube"}
        assert report.ldp["quasipotential"] == pytest.approx(BROWNIAN_Q, abs=1e-4)
        assert report.seed == 3

    @pytest.mark.slow
    def test_same_seed_gives_identical_reports(self, tmp_path):
        path = edited_scenario(tmp_path, "brownian1d", "dt = 1e-3\npaths = 100000", "dt = 1e-2\npaths = 2000")
        reports = []
        for threads in ("1", "3"):
            out = tmp_path / f"run{threads}"
            args = ["mc-validate", "-s", path, "--nodes", "50", "--seed", "5", "--threads", threads, "--out", str(out)]
            result = runner.invoke(cli, args)
            assert result.exit_code == 0, result.output
            reports.append(load_report(out).reproducible_json())
        assert reports[0] == reports[1]
