"""Command-line interface.

Subcommands: test-hsic, test-dhsic, test-hscic, discover, synth, eval,
experiment, ingest, count.  Exit codes: 0 success, 2 invalid arguments,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conditional import conditional_test, lambda_search
from .dataio import ingest_panel, read_long_csv, write_long_csv
from .discovery import (
    TestConfig,
    count_ci_tests,
    count_dags,
    learn_combined,
    learn_cpdag,
    resit_bivariate,
    resit_multivariate,
)
from .errors import (
    DegenerateDataError,
    IllConditionedError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericalError,
)
from .experiments import EXPERIMENT_IDS, ExperimentSpec, run_experiment
from .funcdata import Mesh
from .graphs import MixedGraph
from .marginal import dhsic_test, hsic_test
from .metrics import score_graphs
from .synth import (
    GeneratorConfig,
    gen_cond_data,
    gen_dag_data,
    gen_fourier_samples,
    gen_hflm_pair,
    gen_logistic_map,
    gen_nonlinearity_sweep,
    gen_random_dag,
)

EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _parse_lambda_grid(text: str) -> np.ndarray:
    """Grid syntax: 'lo:hi:COUNTlog' (log-spaced) or comma-separated values."""
    if ":" in text:
        lo, hi, count = text.split(":")
        log = count.endswith("log")
        count = int(count[:-3] if log else count)
        if log:
            return np.logspace(np.log10(float(lo)), np.log10(float(hi)), count)
        return np.linspace(float(lo), float(hi), count)
    return np.array([float(v) for v in text.split(",")])


def _emit(payload: dict, args, name: str):
    text = json.dumps(payload, indent=2, default=float)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    print(text)


def _load_variables(args, paths_with_flags):
    mesh = Mesh.regular(args.mesh_points)
    out = []
    for path in paths_with_flags:
        data = read_long_csv(path, mesh)
        if len(data) != 1:
            raise InvalidArgumentError(
                f"{path} holds {len(data)} variables; expected exactly one"
            )
        out.append(next(iter(data.values())))
    return out


def _add_common(parser):
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--perms", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mesh-points", type=int, default=100)
    parser.add_argument("--out-dir", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdcausal",
        description="Kernel independence tests and causal discovery for functional data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test-hsic", help="bivariate independence test")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    _add_common(p)

    p = sub.add_parser("test-dhsic", help="joint independence test")
    p.add_argument("--data", required=True, help="long CSV with d variables")
    _add_common(p)

    p = sub.add_parser("test-hscic", help="conditional independence test")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--z", required=True, action="append",
                   help="conditioning variable CSV (repeatable)")
    p.add_argument("--lambda-grid", default="1e-4:1e-1:18log")
    p.add_argument("--lambda-star", type=float, default=None,
                   help="skip the search and use this ridge strength")
    p.add_argument("--rejection-iters", type=int, default=100)
    p.add_argument("--eval-perms", type=int, default=200)
    p.add_argument("--bin-size", type=int, default=10)
    _add_common(p)

    p = sub.add_parser("discover", help="causal structure learning")
    p.add_argument("--data", required=True, help="long CSV with d variables")
    p.add_argument("--method", choices=("constraint", "regression", "combined"),
                   default="constraint")
    p.add_argument("--bin-size", type=int, default=10)
    p.add_argument("--lambda-star", type=float, default=None)
    p.add_argument("--sgs", action="store_true", help="exhaustive subset search")
    _add_common(p)

    p = sub.add_parser("synth", help="generate synthetic data")
    p.add_argument("--model", required=True,
                   choices=("fourier", "hflm-pair", "dag", "conditional",
                            "nonlin-sweep", "logistic"))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n-z", type=int, default=1)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="compare a learnt graph against the truth")
    p.add_argument("--learned", required=True)
    p.add_argument("--truth", required=True)
    _add_common(p)

    p = sub.add_parser("experiment", help="run a benchmark preset")
    p.add_argument("--id", required=True, choices=EXPERIMENT_IDS)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--params", default=None,
                   help="JSON object overriding preset parameters")
    _add_common(p)

    p = sub.add_parser("ingest", help="panel CSV to functional long CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--variables", required=True, help="comma-separated names")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("count", help="combinatorial size of a learning problem")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--dags", type=int, metavar="D")
    group.add_argument("--ci-tests", type=int, metavar="D")
    _add_common(p)
    return parser


def _cmd_test_hsic(args) -> int:
    X, Y = _load_variables(args, [args.x, args.y])
    res = hsic_test(X, Y, P=args.perms, alpha=args.alpha, seed=args.seed)
    _emit(res.to_json(), args, "hsic_result.json")
    return 0


def _cmd_test_dhsic(args) -> int:
    data = read_long_csv(args.data, Mesh.regular(args.mesh_points))
    res = dhsic_test(list(data.values()), P=args.perms, alpha=args.alpha, seed=args.seed)
    _emit(res.to_json(), args, "dhsic_result.json")
    return 0


def _cmd_test_hscic(args) -> int:
    X, Y = _load_variables(args, [args.x, args.y])
    Z = _load_variables(args, args.z)
    grid = _parse_lambda_grid(args.lambda_grid)
    if args.lambda_star is None:
        report = lambda_search(
            X, Y, Z, grid=grid, alpha=args.alpha, P=args.eval_perms,
            B=args.rejection_iters, bin_size=args.bin_size, seed=args.seed,
        )
        lam = report.lambda_star
        _emit(report.to_json(), args, "lambda_search.json")
    else:
        lam = args.lambda_star
    res = conditional_test(
        X, Y, Z, lam, P=args.perms, alpha=args.alpha,
        bin_size=args.bin_size, seed=args.seed,
    )
    _emit(res.to_json(), args, "hscic_result.json")
    return 0


def _cmd_discover(args) -> int:
    data = read_long_csv(args.data, Mesh.regular(args.mesh_points))
    datasets = list(data.values())
    config = TestConfig(
        alpha=args.alpha, perms=args.perms, seed=args.seed,
        bin_size=args.bin_size, use_sgs=args.sgs,
        fixed_lambda=args.lambda_star,
    )
    if args.method == "constraint":
        graph = learn_cpdag(datasets, config)
    elif args.method == "combined":
        graph = learn_combined(datasets, config)
    elif len(datasets) == 2:
        res = resit_bivariate(datasets[0], datasets[1], config)
        graph = MixedGraph([ds.name for ds in datasets])
        if res["direction"] == "x->y":
            graph.add_directed(0, 1)
        elif res["direction"] == "y->x":
            graph.add_directed(1, 0)
        else:
            graph.add_undirected(0, 1)
    else:
        graph = resit_multivariate(datasets, config)["best"]
    _emit(graph.to_json(), args, "graph.json")
    return 0


def _cmd_synth(args) -> int:
    mesh = Mesh.regular(args.mesh_points)
    cfg = GeneratorConfig(
        n=args.n, mesh=mesh, a=args.a, noise_sd=args.noise_sd, seed=args.seed,
        d=args.d, density=args.density, n_z=args.n_z,
    )
    manifest = {"model": args.model, "seed": args.seed, "n": args.n, "a": args.a}
    if args.model == "fourier":
        datasets = [gen_fourier_samples(cfg)]
    elif args.model == "hflm-pair":
        datasets = list(gen_hflm_pair(cfg))
        manifest["truth"] = {"nodes": ["X", "Y"], "directed": [["X", "Y"]], "undirected": []}
    elif args.model == "dag":
        dag = gen_random_dag(args.d, args.density, args.seed)
        datasets = gen_dag_data(dag, cfg)
        manifest["truth"] = dag.to_json()
    elif args.model == "conditional":
        X, Y, Z = gen_cond_data(cfg)
        datasets = [X, Y, *Z]
        manifest["n_z"] = args.n_z
    elif args.model == "nonlin-sweep":
        datasets = list(gen_nonlinearity_sweep(args.r, cfg))
        manifest["r"] = args.r
        manifest["truth"] = {"nodes": ["X", "Y"], "directed": [["X", "Y"]], "undirected": []}
    else:
        datasets = list(gen_logistic_map(args.r, args.n, steps=args.steps, seed=args.seed))
        manifest["r"] = args.r
        manifest["truth"] = {"nodes": ["X", "Y"], "directed": [["X", "Y"]], "undirected": []}
    write_long_csv(args.out, datasets)
    Path(args.out).with_suffix(".manifest.json").write_text(
        json.dumps(manifest, indent=2, default=float) + "\n"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args) -> int:
    learned = MixedGraph.from_json(json.loads(Path(args.learned).read_text()))
    truth = MixedGraph.from_json(json.loads(Path(args.truth).read_text()))
    _emit(score_graphs(learned, truth).to_json(), args, "score.json")
    return 0


def _cmd_experiment(args) -> int:
    params = json.loads(args.params) if args.params else {}
    spec = ExperimentSpec(
        experiment=args.id, trials=args.trials, alpha=args.alpha,
        perms=args.perms, seed=args.seed, mesh_points=args.mesh_points,
        params=params,
    )
    out_dir = args.out_dir or "."
    result = run_experiment(spec, out_dir, workers=args.workers)
    print(json.dumps({k: str(v) for k, v in result["paths"].items()}, indent=2))
    return 0


def _cmd_ingest(args) -> int:
    variables = [v.strip() for v in args.variables.split(",") if v.strip()]
    datasets, report = ingest_panel(args.csv, variables, Mesh.regular(args.mesh_points))
    write_long_csv(args.out, [datasets[v] for v in variables])
    _emit(report, args, "ingest_report.json")
    return 0


def _cmd_count(args) -> int:
    if args.dags is not None:
        print(count_dags(args.dags))
    else:
        print(count_ci_tests(args.ci_tests))
    return 0


_COMMANDS = {
    "test-hsic": _cmd_test_hsic,
    "test-dhsic": _cmd_test_dhsic,
    "test-hscic": _cmd_test_hscic,
    "discover": _cmd_discover,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
    "ingest": _cmd_ingest,
    "count": _cmd_count,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InvalidArgumentError, InsufficientDataError, DegenerateDataError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, IllConditionedError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
