"""
Tests for the CLI - argument handling, output files and exit codes.
"""

import csv

import pytest

from wedge_intensity import __version__
from wedge_intensity.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION, main
from wedge_intensity.densities import pi_hit, pi_survival
from wedge_intensity.geometry import ModelParams
from wedge_intensity.montecarlo import SimConfig
from wedge_intensity.quadrature import QuadConfig
from wedge_intensity.report import INTENSITY_HEADER
from wedge_intensity.scenario import Scenario, TimeGrid, save_scenario

UNIT = ModelParams(mu=(0.0, 0.0), sigma1=1.0, sigma2=1.0, rho=0.0, x0=(1.0, 1.0))


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.setenv("WEDGE_INTENSITY_THREADS", "1")
    monkeypatch.setenv("NO_COLOR", "1")


@pytest.fixture
def unit_config(tmp_path):
    """Scenario file of two independent unit firms."""
    path = tmp_path / "unit.json"
    scenario = Scenario(
        name="unit",
        model=UNIT,
        grid=TimeGrid(0.5, 1.0, 0.5),
        sim=SimConfig(n_paths=20_000, dt=1e-2, horizon=1.0, seed=3),
    )
    save_scenario(scenario, path)
    return path


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestArguments:
    """Tests for argument handling."""

    def test_version(self, capsys):
        """Test --version."""
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_command(self):
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_unknown_scenario(self):
        """Test a name outside the registry."""
        with pytest.raises(SystemExit) as excinfo:
            main(["intensity", "--scenario", "fig9"])
        assert excinfo.value.code == 2

    def test_no_scenario(self, capsys):
        """Test a command without --config or --scenario."""
        assert main(["survival"]) == EXIT_CONFIG
        assert "scenario is required" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        """Test that a broken file exits with the configuration code and writes nothing."""
        config = tmp_path / "bad.json"
        config.write_text("{not json")
        out = tmp_path / "out.csv"
        assert main(["survival", "--config", str(config), "--out", str(out)]) == EXIT_CONFIG
        assert not out.exists()
        assert "Error:" in capsys.readouterr().err

    def test_bad_tolerance(self, unit_config, tmp_path):
        """Test a non-positive --tol."""
        out = tmp_path / "out.csv"
        assert main(["survival", "--config", str(unit_config), "--tol", "0", "--out", str(out)]) == EXIT_CONFIG
        assert not out.exists()

    def test_bad_grid(self, unit_config):
        """Test a malformed time grid."""
        assert main(["survival", "--config", str(unit_config), "--t-grid", "1:0.5"]) == EXIT_CONFIG

    def test_bad_log_level(self, unit_config):
        """Test an unknown logging level."""
        assert main(["--log-level", "LOUD", "survival", "--config", str(unit_config)]) == EXIT_CONFIG

    def test_bad_thread_count(self, monkeypatch, unit_config):
        """Test a malformed WEDGE_INTENSITY_THREADS."""
        monkeypatch.setenv("WEDGE_INTENSITY_THREADS", "many")
        assert main(["survival", "--config", str(unit_config)]) == EXIT_CONFIG


class TestCommands:
    """Tests for the table commands."""

    def test_survival(self, unit_config, tmp_path):
        """Test the survival table of the independent model."""
        out = tmp_path / "survival.csv"
        assert main(["survival", "--config", str(unit_config), "--t-grid", "0:1:0.5", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["t", "survival", "quad_err"]
        assert [float(r[0]) for r in rows[1:]] == [0.0, 0.5, 1.0]
        assert float(rows[1][1]) == 1.0
        assert float(rows[3][1]) == pytest.approx(pi_survival(1.0, 1.0, 0.0) ** 2, rel=1e-6)

    def test_survival_stdout(self, unit_config, capsys):
        """Test writing the table to stdout."""
        assert main(["survival", "--config", str(unit_config)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "t,survival,quad_err"
        assert len(lines) == 3

    def test_joint(self, unit_config, tmp_path):
        """Test the joint density table, blank outside s < t."""
        out = tmp_path / "joint.csv"
        argv = ["joint", "--config", str(unit_config), "--s-grid", "0.5:1:0.5", "--t-grid", "0.5:1:0.5", "--out", str(out)]
        assert main(argv) == 0
        rows = read_csv(out)
        assert rows[0] == ["s", "t", "g", "quad_err"]
        values = {(float(r[0]), float(r[1])): r[2] for r in rows[1:]}
        assert values[(0.5, 0.5)] == ""
        assert values[(1.0, 0.5)] == ""
        assert values[(1.0, 1.0)] == ""
        expected = pi_hit(1.0, 0.5, 0.0) * pi_hit(1.0, 1.0, 0.0)
        assert float(values[(0.5, 1.0)]) == pytest.approx(expected, rel=1e-5)

    def test_intensity(self, unit_config, tmp_path):
        """Test the intensity table of the independent model, identical on a rerun."""
        first, second = tmp_path / "first.csv", tmp_path / "second.csv"
        for out in (first, second):
            assert main(["intensity", "--config", str(unit_config), "--grid", "0.5:1:0.5", "--out", str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()
        rows = read_csv(first)
        assert rows[0] == list(INTENSITY_HEADER)
        assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0]
        for row in rows[1:]:
            u = float(row[0])
            expected = pi_hit(1.0, u, 0.0) / pi_survival(1.0, u, 0.0)
            assert float(row[1]) == pytest.approx(expected, rel=1e-6)
            assert float(row[2]) == pytest.approx(expected, rel=1e-6)
            assert row[3] == row[4] == "BothAlive"

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        """Test that an unreachable tolerance gives the numerical exit code."""
        path = tmp_path / "strict.json"
        scenario = Scenario(
            name="strict",
            model=UNIT,
            grid=TimeGrid(0.5, 0.5, 0.5),
            quad=QuadConfig(rel_tol=1e-300, abs_tol=1e-300, max_panels=1),
        )
        save_scenario(scenario, path)
        assert main(["intensity", "--config", str(path), "--out", str(tmp_path / "out.csv")]) == EXIT_NUMERICAL

    @pytest.mark.slow
    def test_figures(self, tmp_path):
        """Test one selected figure on a short grid, identical on a rerun."""
        outputs = []
        for run in ("a", "b"):
            out_dir = tmp_path / run
            assert main(["figures", "--out-dir", str(out_dir), "--figure", "fig4", "--grid", "2.5:3:0.5"]) == 0
            outputs.append(out_dir)
        first, second = outputs
        assert sorted(p.name for p in first.iterdir()) == ["fig4.csv", "fig4.svg"]
        for name in ("fig4.csv", "fig4.svg"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
        rows = read_csv(first / "fig4.csv")
        assert rows[0] == ["u", "lambda2_fig4-rho0.1", "lambda2_fig4-rho-0.1"]
        assert [float(r[0]) for r in rows[1:]] == [2.5, 3.0]
        assert (first / "fig4.svg").read_text(encoding="utf-8").startswith("<svg ")

@pytest.mark.slow
class TestValidate:
    """Tests for the validate command."""

    def test_perturbed_exit_code(self, unit_config, tmp_path, capsys):
        """Test that scaled analytic values give the validation exit code."""
        out = tmp_path / "validation.csv"
        argv = ["validate", "--config", str(unit_config), "--perturb-analytic", "1.5", "--out", str(out)]
        assert main(argv) == EXIT_VALIDATION
        captured = capsys.readouterr()
        assert "FAILED" in captured.out
        assert read_csv(out)[0] == ["quantity", "analytic", "mc", "std_err", "z", "status"]
