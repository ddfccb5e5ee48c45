"""Command-line interface.

Subcommands:

* ``solve <system.json>`` -- Riccati solve; prints the optimal gain, its
  closed-loop spectral radius, and the cost of the bundled initial gain.
* ``run <experiment.json>`` -- execute a seeded multi-run experiment and
  write traces, median curves, a ledger summary, and optionally an SVG.
* ``probe <probe.json>`` -- run one statistical probe and print its report.

Configuration comes from files and flags only; environment variables are
not consulted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from zolqr import diagnostics, harness, lqr_core
from zolqr.errors import ConfigError, ParseError, ZolqrError
from zolqr.pg_algorithms import RunConfig


def _sig12(value: float) -> str:
    return format(float(value), ".12g")


def _matrix_rows(matrix: np.ndarray) -> str:
    return "[" + "; ".join(
        "[" + ", ".join(_sig12(v) for v in row) + "]" for row in matrix
    ) + "]"


def _cmd_solve(args) -> int:
    system, initial_gain, _ = harness.load_system(args.system)
    value, best_gain = lqr_core.optimal_gain(system)
    best_cost = float(np.trace(value @ system.sigma0))
    loop_radius = lqr_core.dense_linalg.spectral_radius(system.a - system.b @ best_gain)
    print(f"optimal gain K*        : {_matrix_rows(best_gain)}")
    print(f"rho(A - B K*)          : {_sig12(loop_radius)}")
    print(f"cost C(K*)             : {_sig12(best_cost)}")
    if initial_gain is not None:
        initial_cost = lqr_core.cost(system, initial_gain)
        print(f"cost C(K0)             : {_sig12(initial_cost)}")
        print(f"initial excess cost    : {_sig12(initial_cost - best_cost)}")
    return 0


def _cmd_run(args) -> int:
    config = harness.load_experiment(
        args.experiment,
        seed_override=args.seed,
        output_dir_override=args.output_dir,
        emit_svg_override=True if args.svg else None,
    )
    summary = harness.run_experiment(config)
    for label, info in summary["labels"].items():
        print(
            f"{label}: evaluations={info['cost_evaluations']} "
            f"two_point={info['two_point_queries']} "
            f"median_final_gap={info['final_gap_median']} "
            f"terminations={info['termination_counts']}"
        )
    print(f"outputs written to {config.output_dir}")
    return 0 if summary["all_completed"] else 1


def _resolve_gain(system, initial_gain, spec_value):
    if spec_value is None:
        if initial_gain is None:
            raise ConfigError("probe needs a gain: none in config and no K0 in system file")
        return initial_gain
    return np.asarray(spec_value, dtype=np.float64)


def _cmd_probe(args) -> int:
    path = Path(args.probe)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read probe file {path}: {exc}") from exc
    if "system" not in data or "probe" not in data:
        raise ConfigError("probe file needs 'system' and 'probe' keys")
    system, initial_gain, _ = harness.load_system(path.parent / data["system"])
    seed = int(args.seed if args.seed is not None else data.get("seed", 0))
    kind = data["probe"]

    if kind == "bias":
        report = diagnostics.estimator_bias_probe(
            system,
            _resolve_gain(system, initial_gain, data.get("gain")),
            radius=float(data.get("radius", 1e-2)),
            sample_count=int(data.get("samples", 100_000)),
            seed=seed,
        )
    elif kind == "gradient_domination":
        _, best_gain = lqr_core.optimal_gain(system)
        report = diagnostics.gradient_domination_probe(
            system,
            best_gain,
            _resolve_gain(system, initial_gain, data.get("gain")),
            grid_size=int(data.get("grid_size", 500)),
            seed=seed,
        )
    elif kind == "variance_reduction":
        config = RunConfig(
            algorithm="svrpg",
            step_size=float(data.get("step_size", 1e-4)),
            epochs=1,
            inner_steps=1,
            samples=int(data.get("samples", 50)),
            inner_samples=int(data.get("inner_samples", 25)),
            outer_radius=float(data.get("outer_radius", 1e-4)),
            inner_radius=float(data.get("inner_radius", 5e-2)),
        )
        report = diagnostics.variance_reduction_probe(
            system,
            _resolve_gain(system, initial_gain, data.get("gain")),
            displacement=float(data.get("displacement", 1e-3)),
            config=config,
            repeats=int(data.get("repeats", 300)),
            seed=seed,
        )
    elif kind == "local_lipschitz":
        report = diagnostics.local_lipschitz_probe(
            system,
            _resolve_gain(system, initial_gain, data.get("gain")),
            displacement=float(data.get("displacement", 1e-3)),
            pairs=int(data.get("pairs", 200)),
            seed=seed,
        )
    else:
        raise ConfigError(f"unknown probe {kind!r}")

    text = report.to_json()
    print(text)
    if args.output_dir is not None:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"probe_{report.name}.json").write_text(text + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zolqr",
        description="Derivative-free policy gradient solvers for discrete-time LQR",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Riccati solve and cost report for a system file")
    solve.add_argument("system", help="system JSON file")
    solve.set_defaults(func=_cmd_solve)

    run = sub.add_parser("run", help="execute a seeded multi-run experiment")
    run.add_argument("experiment", help="experiment JSON file")
    run.add_argument("--seed", type=int, default=None, help="replace the seed list with one seed")
    run.add_argument("--output-dir", default=None, help="override the output directory")
    run.add_argument("--svg", action="store_true", help="emit the median-gap SVG chart")
    run.set_defaults(func=_cmd_run)

    probe = sub.add_parser("probe", help="run one statistical probe")
    probe.add_argument("probe", help="probe JSON file")
    probe.add_argument("--seed", type=int, default=None, help="override the probe seed")
    probe.add_argument("--output-dir", default=None, help="also write the report here")
    probe.set_defaults(func=_cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ZolqrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
