import json

import numpy as np
import pandas as pd
import pytest

from fdcausal.errors import InvalidArgumentError
from fdcausal.experiments import (
    EXPERIMENT_IDS,
    ExperimentSpec,
    aggregate,
    emit_plot_data,
    run_experiment,
)


def tiny_spec(exp, **params):
    defaults = {
        "trials": 2,
        "alpha": 0.05,
        "perms": 120,
        "seed": 7,
        "mesh_points": 60,
    }
    defaults.update(params)
    return ExperimentSpec(experiment=exp, **defaults)


class TestSpec:
    def test_unknown_id_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ExperimentSpec(experiment="fig99")

    def test_all_ids_have_plot_schema(self):
        from fdcausal.experiments import _PLOT_SCHEMAS
        assert set(EXPERIMENT_IDS) == set(_PLOT_SCHEMAS)


class TestRunExperiment:
    def test_fig1a_files_and_columns(self, tmp_path):
        spec = tiny_spec(
            "fig1a", params={"n_grid": (40,), "a_grid": (0.0, 1.0)}
        )
        result = run_experiment(spec, tmp_path)
        trials = result["trials"]
        assert len(trials) == 4  # 2 points x 2 trials
        assert {"n", "a", "trial", "seed", "p_value", "reject"} <= set(trials.columns)
        agg = result["aggregate"]
        assert {"n", "a", "rate", "trials"} <= set(agg.columns)
        plot = result["plot"]
        assert list(plot.columns) == ["a", "n", "power"]
        for key in ("trials", "aggregate", "plot", "manifest"):
            assert result["paths"][key].exists()

    def test_deterministic_across_runs(self, tmp_path):
        spec = tiny_spec("fig4a", trials=1, params={"n_grid": (60,)})
        r1 = run_experiment(spec, tmp_path / "a")
        r2 = run_experiment(spec, tmp_path / "b")
        assert r1["paths"]["trials"].read_text() == r2["paths"]["trials"].read_text()
        assert (
            json.loads(r1["paths"]["manifest"].read_text())["seed"]
            == json.loads(r2["paths"]["manifest"].read_text())["seed"]
        )

    def test_worker_pool_does_not_change_bytes(self, tmp_path):
        spec = tiny_spec("fig1a", params={"n_grid": (40,), "a_grid": (0.0, 1.0)})
        r1 = run_experiment(spec, tmp_path / "seq", workers=1)
        r2 = run_experiment(spec, tmp_path / "par", workers=2)
        assert r1["paths"]["trials"].read_text() == r2["paths"]["trials"].read_text()

    def test_aggregate_rate_equals_mean_of_decisions(self, tmp_path):
        spec = tiny_spec(
            "fig1a", trials=3, params={"n_grid": (40,), "a_grid": (0.0,)}
        )
        result = run_experiment(spec, tmp_path)
        trials, agg = result["trials"], result["aggregate"]
        assert agg["rate"].iloc[0] == pytest.approx(trials["reject"].mean())

    def test_figg2_runs(self, tmp_path):
        spec = tiny_spec("figG2", params={"n_grid": (30,), "r_grid": (0.0,), "steps": 60})
        result = run_experiment(spec, tmp_path)
        assert "shd" in result["aggregate"].columns


class TestEmitPlotData:
    def test_empty_results_header_only(self):
        empty = pd.DataFrame()
        plot = emit_plot_data(empty, "fig1a")
        assert list(plot.columns) == ["a", "n", "power"]
        assert plot.empty

    def test_fig5_schema(self):
        agg = pd.DataFrame(
            {"n": [100, 100], "d": [3, 4], "shd_norm": [0.1, 0.2], "trials": [5, 5]}
        )
        plot = emit_plot_data(agg, "fig5")
        assert list(plot.columns) == ["n", "d", "shd_norm"]

    def test_unknown_id(self):
        with pytest.raises(InvalidArgumentError):
            emit_plot_data(pd.DataFrame(), "nope")


class TestErrorRows:
    def test_failed_trial_recorded_and_excluded(self, tmp_path, monkeypatch):
        import fdcausal.experiments as exp_mod

        original = exp_mod.run_point_trial

        def flaky(spec, point, point_idx, trial, shared):
            if trial == 1:
                raise RuntimeError("synthetic failure")
            return original(spec, point, point_idx, trial, shared)

        monkeypatch.setattr(exp_mod, "run_point_trial", flaky)
        spec = tiny_spec("fig1a", trials=2, params={"n_grid": (40,), "a_grid": (0.0,)})
        result = run_experiment(spec, tmp_path)
        trials = result["trials"]
        assert trials["error"].notna().sum() == 1
        agg = result["aggregate"]
        assert agg["trials"].iloc[0] == 1
        assert agg["failed"].iloc[0] == 1
