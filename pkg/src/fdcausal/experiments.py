"""Monte-Carlo experiment presets and the trial runner.

Each preset pairs a generator with a test or learner over a grid of
configurations and emits one row per (grid point, trial) plus an aggregate
table whose axes match the package's benchmark figures.  Trials are
independent tasks keyed by (seed, point, trial), so results do not depend on
the worker pool width, and every output directory carries a manifest that
reproduces the run.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .conditional import conditional_test, lambda_search
from .discovery import (
    TestConfig,
    learn_cpdag,
    learn_combined,
    resit_bivariate,
    resit_multivariate,
)
from .errors import InvalidArgumentError
from .funcdata import Mesh
from .graphs import MixedGraph
from .marginal import dhsic_test, hsic_test
from .metrics import precision, recall, shd, shd_norm
from .synth import (
    GeneratorConfig,
    gen_cond_data,
    gen_dag_data,
    gen_hflm_pair,
    gen_logistic_map,
    gen_nonlinearity_sweep,
    gen_random_dag,
)

EXPERIMENT_IDS = (
    "fig1a", "fig1b", "fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6", "figG1", "figG2",
)

_A_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
_N_GRID = (100, 200, 300)


@dataclass
class ExperimentSpec:
    """One experiment run: preset id, trial count and protocol constants."""

    experiment: str
    trials: int = 200
    alpha: float = 0.05
    perms: int = 1000
    seed: int = 0
    mesh_points: int = 100
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_IDS:
            raise InvalidArgumentError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENT_IDS}"
            )

    def mesh(self) -> Mesh:
        return Mesh.regular(self.mesh_points)

    def to_json(self) -> dict:
        out = asdict(self)
        out["version"] = __version__
        return out


def _trial_seed(base: int, point: int, trial: int) -> int:
    return int(np.random.SeedSequence([base, point, trial]).generate_state(1)[0])


def _cfg(spec: ExperimentSpec, **kw) -> GeneratorConfig:
    kw.setdefault("mesh", spec.mesh())
    return GeneratorConfig(**kw)


def _direction_shd(direction: str | None) -> int:
    # truth is x -> y in every bivariate preset
    if direction == "x->y":
        return 0
    if direction == "y->x":
        return 2
    return 1


# --- grid builders ---------------------------------------------------------

def _points(spec: ExperimentSpec) -> list[dict]:
    p = spec.params
    exp = spec.experiment
    if exp in ("fig1a", "fig1b"):
        return [
            {"n": n, "a": a}
            for n in p.get("n_grid", _N_GRID)
            for a in p.get("a_grid", _A_GRID)
        ]
    if exp == "fig2":
        return [
            {"n": n, "dz": dz}
            for n in p.get("n_grid", _N_GRID)
            for dz in p.get("dz_grid", (1,))
        ]
    if exp == "fig3":
        return [
            {"n": n, "dz": dz, "a": a}
            for dz in p.get("dz_grid", (1,))
            for n in p.get("n_grid", _N_GRID)
            for a in p.get("a_grid", _A_GRID)
        ]
    if exp in ("fig4a", "fig4b"):
        return [{"n": n} for n in p.get("n_grid", _N_GRID)]
    if exp in ("fig5", "fig6"):
        return [
            {"n": n, "d": d}
            for d in p.get("d_grid", (3, 4, 5, 6))
            for n in p.get("n_grid", _N_GRID)
        ]
    if exp in ("figG1", "figG2"):
        return [
            {"n": n, "r": r}
            for n in p.get("n_grid", (100,))
            for r in p.get("r_grid", (0.0, 0.25, 0.5, 0.75, 1.0))
        ]
    raise InvalidArgumentError(spec.experiment)


def _search_lambda(spec: ExperimentSpec, n: int, dz: int, seed: int):
    """One ridge search per grid point, reused across that point's trials."""
    p = spec.params
    cfg = _cfg(spec, n=n, a=p.get("search_a", 1.0), seed=seed, n_z=dz)
    X, Y, Z = gen_cond_data(cfg)
    return lambda_search(
        X,
        Y,
        Z,
        grid=p.get("lambda_grid"),
        alpha=spec.alpha,
        P=p.get("eval_perms", 200),
        B=p.get("rejection_iters", 100),
        bin_size=p.get("bin_size", 10),
        seed=seed,
    )


def _prepare(spec: ExperimentSpec) -> dict:
    """Parent-process work shared by all trials (ridge searches)."""
    shared: dict = {}
    if spec.experiment in ("fig2", "fig3"):
        for k, point in enumerate(_points(spec)):
            key = (point["n"], point["dz"])
            if key in shared:
                continue
            report = _search_lambda(spec, *key, seed=_trial_seed(spec.seed, 10_000 + k, 0))
            shared[key] = report
    if spec.experiment in ("fig5", "fig6"):
        # cache one ridge strength per (n, conditioning size), searched on
        # representative learner data (trial-0 graph data of the largest d)
        p = spec.params
        cache: dict = {}
        d = max(pt["d"] for pt in _points(spec))
        for n in sorted({pt["n"] for pt in _points(spec)}):
            seed = _trial_seed(spec.seed, 20_000, n)
            dag = gen_random_dag(d, p.get("density", 0.5), seed)
            data = gen_dag_data(dag, _cfg(spec, n=n, a=1.0, seed=seed, d=d))
            for level in range(1, min(d - 2, p.get("max_level", 3)) + 1):
                report = lambda_search(
                    data[0],
                    data[1],
                    data[2 : 2 + level],
                    grid=p.get("lambda_grid"),
                    alpha=spec.alpha,
                    P=p.get("eval_perms", 100),
                    B=p.get("rejection_iters", 50),
                    bin_size=p.get("bin_size", 10),
                    seed=_trial_seed(spec.seed, 30_000, level),
                )
                cache[(n, level)] = report.lambda_star
        shared["lambda_cache"] = cache
    return shared


def _test_config(spec: ExperimentSpec, seed: int, lambda_cache=None) -> TestConfig:
    p = spec.params
    return TestConfig(
        alpha=spec.alpha,
        perms=spec.perms,
        seed=seed,
        bin_size=p.get("bin_size", 10),
        eval_perms=p.get("eval_perms", 100),
        rejection_iters=p.get("rejection_iters", 50),
        basis_A=p.get("basis_A", 5),
        basis_B=p.get("basis_B", 5),
        ridge=p.get("ridge", 1e-6),
        lambda_cache=dict(lambda_cache or {}),
    )


def run_point_trial(spec: ExperimentSpec, point: dict, point_idx: int, trial: int, shared: dict) -> dict:
    """One (grid point, trial) outcome row."""
    seed = _trial_seed(spec.seed, point_idx, trial)
    exp = spec.experiment
    row = dict(point)
    row["trial"] = trial
    row["seed"] = seed

    if exp == "fig1a":
        X, Y = gen_hflm_pair(_cfg(spec, n=point["n"], a=point["a"], seed=seed))
        res = hsic_test(X, Y, P=spec.perms, alpha=spec.alpha, seed=seed)
        row.update(statistic=res.statistic, p_value=res.p_value, reject=int(res.reject))
    elif exp == "fig1b":
        d = spec.params.get("d", 4)
        dag = gen_random_dag(d, spec.params.get("density", 0.5), seed)
        data = gen_dag_data(dag, _cfg(spec, n=point["n"], a=point["a"], seed=seed, d=d))
        res = dhsic_test(data, P=spec.perms, alpha=spec.alpha, seed=seed)
        row.update(statistic=res.statistic, p_value=res.p_value, reject=int(res.reject))
    elif exp == "fig2":
        report = shared[(point["n"], point["dz"])]
        rates = np.asarray(report.evaluation_rejection_rate)
        best = int(np.argmin(np.abs(rates - spec.alpha)))
        row.update(lambda_star=report.lambda_star, rate_at_star=float(rates[best]))
    elif exp == "fig3":
        lam = shared[(point["n"], point["dz"])].lambda_star
        X, Y, Z = gen_cond_data(
            _cfg(spec, n=point["n"], a=point["a"], seed=seed, n_z=point["dz"])
        )
        res = conditional_test(
            X, Y, Z, lam, P=spec.perms, alpha=spec.alpha,
            bin_size=spec.params.get("bin_size", 10), seed=seed,
        )
        row.update(statistic=res.statistic, p_value=res.p_value, reject=int(res.reject),
                   lambda_star=lam)
    elif exp == "fig4a":
        X, Y = gen_hflm_pair(_cfg(spec, n=point["n"], a=1.0, seed=seed))
        res = resit_bivariate(X, Y, _test_config(spec, seed))
        row.update(shd=_direction_shd(res["direction"]),
                   p_forward=res["p_forward"], p_backward=res["p_backward"])
    elif exp == "fig4b":
        d = spec.params.get("d", 3)
        dag = gen_random_dag(d, spec.params.get("density", 0.5), seed)
        data = gen_dag_data(dag, _cfg(spec, n=point["n"], a=1.0, seed=seed, d=d))
        out = resit_multivariate(data, _test_config(spec, seed))
        row.update(shd=shd(out["best"], dag))
    elif exp in ("fig5", "fig6"):
        d = point["d"]
        dag = gen_random_dag(d, spec.params.get("density", 0.5), seed)
        data = gen_dag_data(dag, _cfg(spec, n=point["n"], a=1.0, seed=seed, d=d))
        config = _test_config(spec, seed, shared.get("lambda_cache"))
        learned = learn_cpdag(data, config) if exp == "fig5" else learn_combined(data, config)
        prec = precision(learned, dag)
        rec = recall(learned)
        row.update(
            shd=shd(learned, dag),
            shd_norm=shd_norm(learned, dag),
            precision=np.nan if prec is None else prec,
            recall=np.nan if rec is None else rec,
        )
    elif exp == "figG1":
        X, Y = gen_nonlinearity_sweep(point["r"], _cfg(spec, n=point["n"], a=1.0, seed=seed))
        res = resit_bivariate(X, Y, _test_config(spec, seed))
        row.update(shd=_direction_shd(res["direction"]))
    elif exp == "figG2":
        X, Y = gen_logistic_map(point["r"], point["n"],
                                steps=spec.params.get("steps", 100), seed=seed)
        res = resit_bivariate(X, Y, _test_config(spec, seed))
        row.update(shd=_direction_shd(res["direction"]))
    else:
        raise InvalidArgumentError(exp)
    return row


def _worker(args):
    spec_json, point, point_idx, trial, shared = args
    spec = ExperimentSpec(**spec_json)
    try:
        return run_point_trial(spec, point, point_idx, trial, shared)
    except Exception as exc:  # noqa: BLE001 - a failed trial becomes an error row
        row = dict(point)
        row.update(trial=trial, seed=_trial_seed(spec.seed, point_idx, trial), error=str(exc))
        return row


def aggregate(trials: pd.DataFrame, spec: ExperimentSpec) -> pd.DataFrame:
    """Per-point means of the outcome columns; failed trials are excluded."""
    coords = [c for c in ("n", "a", "d", "dz", "r") if c in trials.columns]
    if "error" in trials.columns:
        ok = trials[trials["error"].isna()].copy()
        failed = trials[~trials["error"].isna()].groupby(coords).size().rename("failed")
    else:
        ok = trials.copy()
        failed = None
    agg_map = {}
    if "reject" in ok.columns:
        agg_map["reject"] = ("reject", "mean")
    for col in ("shd", "shd_norm", "precision", "recall", "lambda_star", "rate_at_star"):
        if col in ok.columns:
            agg_map[col] = (col, "mean")
    out = ok.groupby(coords).agg(**agg_map, trials=("trial", "size")).reset_index()
    if "reject" in out.columns:
        out = out.rename(columns={"reject": "rate"})
    if failed is not None:
        out = out.merge(failed.reset_index(), on=coords, how="left")
        out["failed"] = out["failed"].fillna(0).astype(int)
    return out.sort_values(coords).reset_index(drop=True)


_PLOT_SCHEMAS = {
    "fig1a": ("a", "n", "rate", "power"),
    "fig1b": ("a", "n", "rate", "power"),
    "fig2": ("n", "dz", "lambda_star", "lambda_star"),
    "fig3": ("a", "n", "rate", "power"),
    "fig4a": ("n", None, "shd", "shd"),
    "fig4b": ("n", None, "shd", "shd"),
    "fig5": ("n", "d", "shd_norm", "shd_norm"),
    "fig6": ("n", "d", "shd_norm", "shd_norm"),
    "figG1": ("r", None, "shd", "shd"),
    "figG2": ("r", None, "shd", "shd"),
}


def emit_plot_data(aggregated: pd.DataFrame, experiment: str) -> pd.DataFrame:
    """Pivot an aggregate table into (x, series, y) plot columns."""
    if experiment not in _PLOT_SCHEMAS:
        raise InvalidArgumentError(f"unknown experiment {experiment!r}")
    x, series, y, out_name = _PLOT_SCHEMAS[experiment]
    cols = [x] + ([series] if series else []) + [y]
    if aggregated.empty:
        return pd.DataFrame(columns=[c if c != y else out_name for c in cols])
    out = aggregated[cols].rename(columns={y: out_name})
    order = [x] + ([series] if series else [])
    return out.sort_values(order).reset_index(drop=True)


def run_experiment(spec: ExperimentSpec, out_dir, workers: int = 1) -> dict:
    """Run all trials, write trials/aggregate/plot CSVs plus a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = _points(spec)
    shared = _prepare(spec)

    tasks = [
        (spec.to_json(), point, k, trial, shared)
        for k, point in enumerate(points)
        for trial in range(spec.trials)
    ]
    for task in tasks:
        task[0].pop("version", None)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_worker, tasks, chunksize=4))
    else:
        rows = [_worker(t) for t in tasks]

    trials = pd.DataFrame(rows)
    coords = [c for c in ("n", "a", "d", "dz", "r") if c in trials.columns]
    trials = trials.sort_values(coords + ["trial"]).reset_index(drop=True)
    agg = aggregate(trials, spec)
    plot = emit_plot_data(agg, spec.experiment)

    paths = {
        "trials": out_dir / f"{spec.experiment}_trials.csv",
        "aggregate": out_dir / f"{spec.experiment}_aggregate.csv",
        "plot": out_dir / f"{spec.experiment}_plot.csv",
        "manifest": out_dir / f"{spec.experiment}_manifest.json",
    }
    trials.to_csv(paths["trials"], index=False)
    agg.to_csv(paths["aggregate"], index=False)
    plot.to_csv(paths["plot"], index=False)
    manifest = spec.to_json()
    manifest["points"] = points
    if "lambda_cache" in shared:
        manifest["lambda_cache"] = {f"{k[0]},{k[1]}": v for k, v in shared["lambda_cache"].items()}
    paths["manifest"].write_text(json.dumps(manifest, indent=2, default=float))
    return {"trials": trials, "aggregate": agg, "plot": plot, "paths": paths}
