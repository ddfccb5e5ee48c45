#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the three backend entry points on the bundled 3-state system plus a
larger random stable system, then times one full two-point optimizer run
under each backend.  Run after `pip install -e . --no-build-isolation`:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from zolqr import _kernels_py

try:
    from zolqr import _kernels
except ImportError:
    _kernels = None

HERE = Path(__file__).parent


def _load_benchmark():
    data = json.loads((HERE / "appendix_g.json").read_text())
    return (
        np.array(data["A"]),
        np.array(data["B"]),
        np.array(data["Q"]),
        np.array(data["R"]),
        np.array(data["Sigma0"]),
        np.array(data["K0"]),
    )


def _time(fn, repeats: int) -> float:
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_kernels() -> None:
    a, b, q, r, sigma0, gain = _load_benchmark()
    rng = np.random.default_rng(7)
    gains = gain[None] + 1e-3 * rng.standard_normal((512, 1, 3))

    big = rng.standard_normal((12, 12))
    big *= 0.9 / np.abs(np.linalg.eigvals(big)).max()
    big_rhs = np.eye(12)

    backends = [("pure", _kernels_py)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))
    else:
        print("compiled extension not built; timing the numpy fallback only\n")

    cases = [
        ("spectral_radius 3x3", lambda mod: mod.spectral_radius(a), 2000),
        ("spectral_radius 12x12", lambda mod: mod.spectral_radius(big), 500),
        ("lyapunov solve 3x3", lambda mod: mod.solve_discrete_lyapunov(0.5 * np.eye(3), q), 2000),
        ("lyapunov solve 12x12", lambda mod: mod.solve_discrete_lyapunov(big, big_rhs), 200),
        (
            "cost batch (512 gains)",
            lambda mod: mod.closed_loop_cost_batch(a, b, q, r, sigma0, gains, 1e-12),
            50,
        ),
    ]
    print(f"{'kernel':<28}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for case_name, call, repeats in cases:
        times = [_time(lambda m=mod: call(m), repeats) for _, mod in backends]
        row = f"{case_name:<28}" + "".join(f"{t * 1e6:>12.1f}us" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    # agreement between backends on the batch kernel
    if _kernels is not None:
        costs_py, rhos_py = _kernels_py.closed_loop_cost_batch(a, b, q, r, sigma0, gains, 1e-12)
        costs_cy, rhos_cy = _kernels.closed_loop_cost_batch(a, b, q, r, sigma0, gains, 1e-12)
        print(
            f"\nbackend agreement: max |cost diff| = {np.abs(costs_py - costs_cy).max():.3e}, "
            f"max |rho diff| = {np.abs(rhos_py - rhos_cy).max():.3e}"
        )


def bench_full_run() -> None:
    import os
    import subprocess
    import sys

    sys.stdout.flush()

    script = (
        "import json, time, numpy as np\n"
        "from pathlib import Path\n"
        "import zolqr\n"
        "from zolqr import harness, pg_algorithms\n"
        f"system, gain, x0 = harness.load_system(Path({str(HERE)!r}) / 'appendix_g.json')\n"
        "cfg = pg_algorithms.RunConfig(algorithm='zo2p_pg', step_size=1e-4,"
        " iterations=500, samples=50, radius=1e-4, seed=0)\n"
        "start = time.perf_counter()\n"
        "trace = pg_algorithms.run_pg_zo2p(system, gain, cfg, x0=x0)\n"
        "elapsed = time.perf_counter() - start\n"
        "print(f'{zolqr.BACKEND_NAME}: 500-iteration two-point run in {elapsed:.2f}s '\n"
        "      f'(final gap {trace.records[-1].normalized_gap:.4f})')\n"
    )
    for backend in ("pure", "compiled") if _kernels is not None else ("pure",):
        env = dict(os.environ, ZOLQR_BACKEND=backend)
        subprocess.run([sys.executable, "-c", script], env=env, check=True)


if __name__ == "__main__":
    bench_kernels()
    print()
    bench_full_run()
