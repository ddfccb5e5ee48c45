"""Experiment orchestration: config loading, seeded runs, trace persistence.

File formats
------------
System JSON: keys ``A``, ``B``, ``Q``, ``R``, ``Sigma0`` (row-major nested
arrays) plus optional ``K0`` (initial gain) and ``x0`` (gap reference state).

Experiment JSON: ``{"system": path, "seeds": [...], "runs": [{"label": ...,
<run config keys>}, ...], "output_dir": path, "emit_svg": bool}``.  Paths are
resolved relative to the experiment file.

Per (label, seed) pair one trace CSV is written with columns
``global_step,epoch,inner_step,cost,normalized_gap,grad_norm,
spectral_radius,cost_evals_cum,two_point_cum`` (floats at 17 significant
digits so a round trip reproduces the records exactly), plus one
median-curve CSV per label, a ledger summary JSON, and optionally an SVG
chart of the median normalized gap.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from zolqr import lqr_core, pg_algorithms
from zolqr.errors import ConfigError, InvalidSystemError, ParseError
from zolqr.lqr_core import LinearQuadraticSystem
from zolqr.pg_algorithms import CSV_COLUMNS, IterationRecord, RunConfig, Trace


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def load_system(path) -> tuple[LinearQuadraticSystem, np.ndarray | None, np.ndarray]:
    """Load and validate a system file.

    Returns ``(system, initial_gain, x0)``; the initial gain is None when
    the file does not carry one, and ``x0`` defaults to the all-ones vector.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read system file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"system file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"system file {path} must contain a JSON object")
    try:
        system = LinearQuadraticSystem.from_dict(data)
    except ValueError as exc:
        raise InvalidSystemError(str(exc)) from exc

    initial_gain = None
    if "K0" in data:
        initial_gain = lqr_core.check_gain(
            system, np.asarray(data["K0"], dtype=np.float64)
        )
    if "x0" in data:
        x0 = np.asarray(data["x0"], dtype=np.float64).reshape(-1)
        if x0.shape[0] != system.n_x:
            raise InvalidSystemError(
                f"x0 has length {x0.shape[0]}, expected {system.n_x}"
            )
    else:
        x0 = np.ones(system.n_x)
    return system, initial_gain, x0


@dataclass(frozen=True)
class ExperimentConfig:
    system_path: Path
    runs: list[tuple[str, RunConfig]]
    seeds: list[int]
    output_dir: Path
    emit_svg: bool = False

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("experiment needs a nonempty seed list")
        labels = [label for label, _ in self.runs]
        if not labels:
            raise ConfigError("experiment needs at least one run")
        if len(set(labels)) != len(labels):
            raise ConfigError("run labels must be unique")
        for label in labels:
            if not re.fullmatch(r"[A-Za-z0-9_.-]+", label):
                raise ConfigError(
                    f"label {label!r} may only contain letters, digits, '_', '.', '-'"
                )


def load_experiment(
    path,
    seed_override: int | None = None,
    output_dir_override=None,
    emit_svg_override: bool | None = None,
) -> ExperimentConfig:
    """Parse an experiment file, applying optional CLI overrides."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read experiment file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"experiment file {path} is not valid JSON: {exc}") from exc
    for key in ("system", "runs"):
        if key not in data:
            raise ConfigError(f"experiment file missing key {key!r}")

    base = path.parent
    runs: list[tuple[str, RunConfig]] = []
    for entry in data["runs"]:
        entry = dict(entry)
        label = entry.pop("label", None)
        if not label:
            raise ConfigError("every run entry needs a 'label'")
        runs.append((label, RunConfig.from_dict(entry)))

    seeds = [int(seed_override)] if seed_override is not None else [
        int(s) for s in data.get("seeds", [])
    ]
    if output_dir_override is not None:
        output_dir = Path(output_dir_override)
    else:
        output_dir = base / data.get("output_dir", "results")
    emit_svg = (
        bool(emit_svg_override)
        if emit_svg_override is not None
        else bool(data.get("emit_svg", False))
    )
    return ExperimentConfig(
        system_path=base / data["system"],
        runs=runs,
        seeds=seeds,
        output_dir=output_dir,
        emit_svg=emit_svg,
    )


def write_trace_csv(trace: Trace, path) -> None:
    """Write records with full round-trip precision (17 significant digits)."""
    lines = [",".join(CSV_COLUMNS)]
    for record in trace.records:
        lines.append(
            ",".join(
                [
                    str(record.global_step),
                    "" if record.epoch is None else str(record.epoch),
                    "" if record.inner_step is None else str(record.inner_step),
                    _fmt(record.cost),
                    _fmt(record.normalized_gap),
                    _fmt(record.grad_norm),
                    _fmt(record.spectral_radius),
                    str(record.cost_evals_cum),
                    str(record.two_point_cum),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> list[IterationRecord]:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != ",".join(CSV_COLUMNS):
        raise ParseError(f"{path} does not carry the expected trace header")
    records = []
    for line in text[1:]:
        parts = line.split(",")
        records.append(
            IterationRecord(
                global_step=int(parts[0]),
                epoch=None if parts[1] == "" else int(parts[1]),
                inner_step=None if parts[2] == "" else int(parts[2]),
                cost=float(parts[3]),
                normalized_gap=float(parts[4]),
                grad_norm=float(parts[5]),
                spectral_radius=float(parts[6]),
                cost_evals_cum=int(parts[7]),
                two_point_cum=int(parts[8]),
            )
        )
    return records


def _median_curve(traces: list[Trace]) -> tuple[list[int], list[float], list[float]]:
    """Per-step medians over seeds, restricted to steps present in every trace."""
    step_sets = [set(r.global_step for r in trace.records) for trace in traces]
    common = sorted(set.intersection(*step_sets)) if step_sets else []
    gaps_by_step = {step: [] for step in common}
    costs_by_step = {step: [] for step in common}
    for trace in traces:
        for record in trace.records:
            if record.global_step in gaps_by_step:
                gaps_by_step[record.global_step].append(record.normalized_gap)
                costs_by_step[record.global_step].append(record.cost)
    med_gap = [float(np.median(gaps_by_step[s])) for s in common]
    med_cost = [float(np.median(costs_by_step[s])) for s in common]
    return common, med_gap, med_cost


def _write_median_csv(path, steps, gaps, costs) -> None:
    lines = ["global_step,median_normalized_gap,median_cost"]
    for step, gap, cost in zip(steps, gaps, costs):
        lines.append(f"{step},{_fmt(gap)},{_fmt(cost)}")
    Path(path).write_text("\n".join(lines) + "\n")


_SVG_PALETTE = ("#1f6fb2", "#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e")


def write_gap_svg(path, curves: list[tuple[str, list[int], list[float]]]) -> None:
    """Minimal polyline chart: median normalized gap (log y) vs iteration."""
    width, height = 760, 480
    left, right, top, bottom = 80, 180, 24, 56
    plot_w, plot_h = width - left - right, height - top - bottom

    xs_all = [s for _, steps, _ in curves for s in steps]
    ys_all = [g for _, _, gaps in curves for g in gaps if g > 0]
    x_max = max(xs_all) if xs_all else 1
    y_min = min(ys_all) if ys_all else 1e-3
    y_max = max(ys_all) if ys_all else 1.0
    log_lo = int(np.floor(np.log10(max(y_min, 1e-16))))
    log_hi = int(np.ceil(np.log10(max(y_max, 1e-16))))
    if log_hi == log_lo:
        log_hi += 1

    def x_pos(step: float) -> float:
        return left + plot_w * (step / x_max if x_max else 0.0)

    def y_pos(gap: float) -> float:
        level = np.log10(max(gap, 1e-16))
        return top + plot_h * (log_hi - level) / (log_hi - log_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    for decade in range(log_lo, log_hi + 1):
        y = y_pos(10.0**decade)
        parts.append(
            f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-size="12" font-family="sans-serif">1e{decade}</text>'
        )
    x_ticks = 5
    for i in range(x_ticks + 1):
        step = round(x_max * i / x_ticks)
        x = x_pos(step)
        parts.append(
            f'<line x1="{x:.2f}" y1="{top + plot_h}" x2="{x:.2f}" '
            f'y2="{top + plot_h + 5}" stroke="#444444" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 20}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif">{step}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 12}" text-anchor="middle" '
        'font-size="13" font-family="sans-serif">iteration</text>'
    )
    parts.append(
        f'<text x="18" y="{top + plot_h / 2:.2f}" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif" transform="rotate(-90 18 {top + plot_h / 2:.2f})">'
        "median normalized gap</text>"
    )
    for idx, (label, steps, gaps) in enumerate(curves):
        color = _SVG_PALETTE[idx % len(_SVG_PALETTE)]
        points = " ".join(
            f"{x_pos(s):.2f},{y_pos(g):.2f}" for s, g in zip(steps, gaps)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = top + 16 + 18 * idx
        lx = left + plot_w + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-size="12" font-family="sans-serif">'
            f"{label}</text>"
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute every (run, seed) pair and persist traces, medians, and ledgers.

    Returns the summary dict (also written to ``summary.json``).  Run
    failures (destabilization, oracle failure) are recorded in the summary
    rather than raised.
    """
    system, initial_gain, x0 = load_system(config.system_path)
    if initial_gain is None:
        raise ConfigError(
            f"system file {config.system_path} carries no initial gain 'K0'"
        )
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary_labels: dict[str, dict] = {}
    curves: list[tuple[str, list[int], list[float]]] = []
    all_completed = True
    for label, run_config in config.runs:
        traces: list[Trace] = []
        for seed in config.seeds:
            trace = pg_algorithms.run(
                system, initial_gain, run_config.with_seed(seed), x0=x0
            )
            write_trace_csv(trace, out / f"{label}_seed{seed}.csv")
            traces.append(trace)

        steps, med_gap, med_cost = _median_curve(traces)
        _write_median_csv(out / f"{label}_median.csv", steps, med_gap, med_cost)
        curves.append((label, steps, med_gap))

        termination_counts: dict[str, int] = {}
        for trace in traces:
            kind = trace.termination.kind
            termination_counts[kind] = termination_counts.get(kind, 0) + 1
            if not trace.termination.is_completed:
                all_completed = False

        def _unanimous(values: list[int]) -> int | None:
            return values[0] if len(set(values)) == 1 else None

        final_gaps = [t.records[-1].normalized_gap for t in traces if t.records]
        summary_labels[label] = {
            "cost_evaluations": _unanimous([t.ledger.cost_evaluations for t in traces]),
            "one_point_queries": _unanimous([t.ledger.one_point_queries for t in traces]),
            "two_point_queries": _unanimous([t.ledger.two_point_queries for t in traces]),
            "final_gap_median": float(np.median(final_gaps)) if final_gaps else None,
            "termination_counts": termination_counts,
        }

    summary = {
        "system": str(config.system_path),
        "seeds": [int(s) for s in config.seeds],
        "labels": summary_labels,
        "all_completed": all_completed,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if config.emit_svg:
        write_gap_svg(out / "normalized_gap.svg", curves)
    return summary
