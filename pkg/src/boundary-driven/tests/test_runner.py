"""Tests for the experiment runner."""

import csv
import json
from unittest.mock import patch

import pytest

from qthermo_mcp.boundary_driven.models import ExperimentConfig
from qthermo_mcp.boundary_driven.runner import (
    CSV_COLUMNS,
    ExperimentRunner,
    format_value,
    load_config,
    write_csv,
)


@pytest.fixture
def runner(tmp_path):
    """Runner writing into a temporary directory."""
    return ExperimentRunner(output_dir=str(tmp_path), workers=1)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestExperimentRunner:
    """Test cases for ExperimentRunner configuration."""

    def test_init_with_arguments(self, tmp_path):
        """Explicit arguments win over the environment."""
        with patch.dict("os.environ", {"QTHERMO_WORKERS": "7"}):
            runner = ExperimentRunner(output_dir=str(tmp_path), workers=2)
        assert runner.workers == 2
        assert runner.output_dir == tmp_path

    def test_init_from_environment(self, tmp_path):
        """QTHERMO_OUTPUT_DIR and QTHERMO_WORKERS are read when no arguments are given."""
        env = {"QTHERMO_OUTPUT_DIR": str(tmp_path), "QTHERMO_WORKERS": "3"}
        with patch.dict("os.environ", env, clear=True):
            runner = ExperimentRunner()
        assert runner.workers == 3
        assert runner.output_dir == tmp_path

    def test_init_defaults(self):
        """Without environment the runner writes to ./out with one worker."""
        with patch.dict("os.environ", {}, clear=True):
            runner = ExperimentRunner()
        assert runner.workers == 1
        assert str(runner.output_dir) == "out"

    @pytest.mark.parametrize("value", ["many", "0"])
    def test_init_bad_workers(self, value):
        """A non-positive or non-integer worker count is rejected."""
        with patch.dict("os.environ", {"QTHERMO_WORKERS": value}, clear=True):
            with pytest.raises(ValueError, match="QTHERMO_WORKERS"):
                ExperimentRunner()

    def test_list_experiments(self):
        """Every experiment is listed with its defaults."""
        experiments = ExperimentRunner.list_experiments()
        assert set(experiments) == {"fig1", "fig2_sweep", "twosite", "convergence", "regime_scan", "ri_trace"}
        assert experiments["twosite"]["beta_R"] == 2.0


class TestLoadConfig:
    """Test cases for load_config and ExperimentConfig."""

    def test_defaults_and_overrides(self, tmp_path):
        """File values sit on top of the defaults and overrides on top of the file."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"experiment": "twosite", "beta_L": 0.7, "samples": 11}))
        config = load_config(str(path), overrides={"samples": 21})
        assert config.experiment == "twosite"
        assert config.beta_L == 0.7
        assert config.beta_R == 2.0
        assert config.samples == 21

    def test_command_line_experiment_wins(self, tmp_path):
        """An experiment given on the command line replaces the file's."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"experiment": "twosite"}))
        assert load_config(str(path), "ri_trace").experiment == "ri_trace"

    def test_missing_experiment(self):
        """Some experiment must be named."""
        with pytest.raises(ValueError, match="no experiment"):
            load_config(None)

    def test_non_object_config(self, tmp_path):
        """The file must hold a JSON object."""
        path = tmp_path / "config.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError, match="JSON object"):
            load_config(str(path))

    @pytest.mark.parametrize(
        "overrides",
        [{"N": 0}, {"N": 9}, {"N": 3, "h": [1.0]}, {"baths": ["L", "L"]}, {"unknown_key": 1}, {"tau_list": [0.1, -0.1]}],
    )
    def test_invalid_values(self, overrides):
        """Out-of-range or unknown keys fail validation."""
        with pytest.raises(ValueError):
            ExperimentConfig.for_experiment("ri_trace", overrides)

    def test_chain_and_baths(self):
        """Uniform fields fill h and missing sides are skipped."""
        config = ExperimentConfig.for_experiment("fig1", {"N": 3})
        assert config.chain(1.0, 2.0).h == (1.0, 1.0, 1.0)
        assert config.chain(1.0, 2.0).J_y == 2.0
        assert [b.side for b in config.bath_specs()] == ["L"]


class TestCsv:
    """Test cases for CSV output."""

    def test_format_value(self):
        """Floats carry 12 significant digits and None is empty."""
        assert format_value(1 / 3) == "0.333333333333"
        assert format_value(None) == ""
        assert format_value("engine") == "engine"

    def test_write_csv(self, tmp_path):
        """Header first, then one row per record in column order."""
        path = tmp_path / "nested" / "rows.csv"
        write_csv(path, ["a", "b"], [{"b": 2.0, "a": 1.0}, {"a": None, "b": 0.5}])
        assert read_csv(path) == [["a", "b"], ["1", "2"], ["", "0.5"]]


class TestExperiments:
    """Small end-to-end runs of each experiment."""

    def test_twosite(self, runner, tmp_path):
        """The oracle comparison passes and writes its CSV and summary."""
        config = ExperimentConfig.for_experiment("twosite", {"t_final": 2.0, "samples": 11})
        response = runner.run(config)
        assert response.success, response.error
        assert all(response.checks.values())
        rows = read_csv(tmp_path / "twosite.csv")
        assert rows[0] == CSV_COLUMNS["twosite"]
        assert len(rows) == 12
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["passed"] is True
        assert summary["metrics"]["closed_form"]["j_s"] == pytest.approx(-0.2583377467760279, abs=1e-12)

    def test_twosite_rejects_longer_chain(self, runner):
        """The oracle only covers two sites; the failure is a config error."""
        config = ExperimentConfig.for_experiment("twosite", {"N": 3, "h": [1.0, 1.0, 1.0]})
        response = runner.run(config)
        assert not response.success
        assert response.error_kind == "config"

    def test_output_override(self, runner, tmp_path):
        """config.output replaces the runner's directory."""
        target = tmp_path / "elsewhere"
        config = ExperimentConfig.for_experiment("ri_trace", {"N": 2, "h": [1.0, 1.0], "steps": 5, "output": str(target)})
        response = runner.run(config)
        assert response.success, response.error
        assert (target / "ri_trace.csv").exists()
        assert (target / "summary.json").exists()

    def test_fig1(self, runner, tmp_path):
        """XX relaxes to the product Gibbs state, XY plateaus at d_iS/dt = beta Wdot."""
        config = ExperimentConfig.for_experiment("fig1", {"N": 3, "t_final": 40.0, "samples": 21, "dt": 0.01})
        response = runner.run(config)
        assert response.success, response.error
        assert response.checks["xx_decay"]
        assert response.checks["xx_gibbs"]
        assert response.checks["xy_plateau"]
        assert (tmp_path / "fig1_xx.csv").exists()
        assert (tmp_path / "fig1_xy.csv").exists()
        assert response.metadata["xy"]["ness_diS_dt"] > 0
        reference = response.metadata["xx"]["decay_reference"]
        assert reference["t"] == pytest.approx(40.0)
        assert "t_final" in reference["note"]

    def test_fig1_long_chain_skips_steady_state(self, runner):
        """Chains beyond the dense Liouvillian size still evolve; the steady state is skipped."""
        config = ExperimentConfig.for_experiment("fig1", {"N": 7, "t_final": 0.2, "samples": 3, "variants": {"xx": [1.0, 1.0]}})
        response = runner.run(config)
        assert response.error_kind != "config"
        assert response.checks["xx_first_law"]
        assert "skipped" in response.metadata["xx"]["ness"]

    def test_fig2_sweep(self, runner, tmp_path):
        """The equilibrium point beta_L h_L = beta_R h_R carries no flows."""
        overrides = {"N": 3, "h": [3.0, 5.0, 2.0], "h_L_points": 5}
        response = runner.run(ExperimentConfig.for_experiment("fig2_sweep", overrides))
        assert response.success, response.error
        assert response.metadata["h_L_equilibrium"] == pytest.approx(3.0)
        assert len(response.data) == 5
        assert len(read_csv(tmp_path / "fig2_sweep.csv")) == 6
        assert read_csv(tmp_path / "fig2_sweep.csv")[0][-1] == "naive_diS_dt"
        assert all("naive_diS_dt" in row for row in response.data)
        assert response.metadata["naive_negative_count"] >= 0

    def test_fig2_sweep_rejects_oversized_chain(self, runner):
        """The dense steady state is limited in size; larger chains are config errors."""
        overrides = {"N": 7, "h": [3.0, 5.0, 5.0, 5.0, 5.0, 5.0, 2.0]}
        response = runner.run(ExperimentConfig.for_experiment("fig2_sweep", overrides))
        assert not response.success
        assert response.error_kind == "config"
        assert "N <= 6" in response.error

    def test_fig2_sweep_needs_two_baths(self, runner):
        """A single bath cannot drive a current."""
        config = ExperimentConfig.for_experiment("fig2_sweep", {"N": 3, "h": [3.0, 5.0, 2.0], "baths": ["L"]})
        response = runner.run(config)
        assert not response.success
        assert response.error_kind == "config"

    def test_fig2_sweep_with_workers(self, runner):
        """Worker threads give the same rows."""
        overrides = {"N": 2, "h": [3.0, 2.0], "h_L_points": 4}
        serial = runner.run(ExperimentConfig.for_experiment("fig2_sweep", overrides))
        pooled = runner.run(ExperimentConfig.for_experiment("fig2_sweep", {**overrides, "workers": 2}))
        assert [r["diS_dt"] for r in pooled.data] == pytest.approx([r["diS_dt"] for r in serial.data], abs=1e-14)

    def test_convergence(self, runner, tmp_path):
        """Scaled coupling converges; fixed coupling plateaus."""
        config = ExperimentConfig.for_experiment("convergence", {"tau_list": [0.1, 0.05, 0.025]})
        response = runner.run(config)
        assert response.success, response.error
        assert response.metadata["slope"] >= 0.45
        assert len(read_csv(tmp_path / "convergence.csv")) == 4

    def test_regime_scan(self, runner, tmp_path):
        """Engine and refrigerator draws land in their regimes below the Carnot bounds."""
        response = runner.run(ExperimentConfig.for_experiment("regime_scan", {"draws": 3}))
        assert response.success, response.error
        assert len(response.data) == 6
        assert response.metadata["grid_points"] == 625
        assert response.metadata["grid_surface_points"] > 0
        assert (tmp_path / "second_law_grid.csv").exists()

    def test_ri_trace(self, runner):
        """Collision bookkeeping closes."""
        config = ExperimentConfig.for_experiment("ri_trace", {"steps": 20})
        response = runner.run(config)
        assert response.success, response.error
        assert len(response.data) == 20
        assert response.data[-1]["t"] == pytest.approx(1.0)
        assert response.metadata["entropy_production"] >= 0

    def test_unexpected_error(self, runner):
        """Other exceptions become failed responses without an error kind."""
        config = ExperimentConfig.for_experiment("ri_trace", {"steps": 2})
        with patch.object(ExperimentRunner, "run_ri_trace", side_effect=RuntimeError("boom")):
            response = runner.run(config)
        assert not response.success
        assert response.error == "boom"
        assert response.error_kind is None


class TestSelftest:
    """Test cases for the invariant suites."""

    def test_selftest_passes(self, runner):
        """All built-in checks pass."""
        response = runner.selftest(seed=0)
        assert response.success, response.error
        assert response.checks["dissipator_equivalence"]
        assert response.checks["no_global_detailed_balance"]
        assert response.checks["collision_entropy_terms"]
        assert response.metadata["collision_configurations"] == 1000
