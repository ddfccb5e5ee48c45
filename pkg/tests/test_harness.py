from __future__ import annotations

import json

import numpy as np
import pytest

from helpers import BENCHMARK_SYSTEM
from zolqr import cli, harness, lqr_core, pg_algorithms
from zolqr.errors import ConfigError, InvalidSystemError, ParseError
from zolqr.harness import ExperimentConfig
from zolqr.pg_algorithms import RunConfig


class TestLoadSystem:
    def test_bundled_benchmark(self):
        system, gain, x0 = harness.load_system(BENCHMARK_SYSTEM)
        assert (system.n_x, system.n_u) == (3, 1)
        assert lqr_core.dense_linalg.spectral_radius(system.a) > 1.0
        assert lqr_core.is_stabilizing(system, gain)
        np.testing.assert_array_equal(x0, np.ones(3))

    def test_non_pd_q_diagnosed(self, tmp_path):
        path = tmp_path / "bad_q.json"
        path.write_text(json.dumps({"A": [[0.5]], "B": [[1.0]], "Q": [[-1.0]], "R": [[1.0]]}))
        with pytest.raises(InvalidSystemError, match="Q not positive definite"):
            harness.load_system(path)

    def test_mismatched_b_rows(self, tmp_path):
        path = tmp_path / "bad_b.json"
        path.write_text(
            json.dumps({"A": [[0.5, 0.0], [0.0, 0.5]], "B": [[1.0]], "Q": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0]]})
        )
        with pytest.raises(InvalidSystemError, match="B has"):
            harness.load_system(path)

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            harness.load_system(path)

    def test_missing_gain_and_x0_defaults(self, tmp_path):
        path = tmp_path / "minimal.json"
        path.write_text(json.dumps({"A": [[0.5]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]}))
        system, gain, x0 = harness.load_system(path)
        assert gain is None
        np.testing.assert_array_equal(x0, np.ones(1))


class TestTraceCsv:
    def test_round_trip_is_exact(self, benchmark, tmp_path):
        system, gain, x0 = benchmark
        config = RunConfig(
            algorithm="svrpg", step_size=1e-4, epochs=3, inner_steps=2,
            samples=5, inner_samples=4, outer_radius=1e-4, inner_radius=5e-2,
            seed=6, record_every=2,
        )
        trace = pg_algorithms.run_svrpg(system, gain, config, x0=x0)
        path = tmp_path / "trace.csv"
        harness.write_trace_csv(trace, path)
        assert harness.read_trace_csv(path) == trace.records

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bogus.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ParseError):
            harness.read_trace_csv(path)


def _tiny_experiment(tmp_path, seeds=(0, 1), emit_svg=False) -> ExperimentConfig:
    return ExperimentConfig(
        system_path=BENCHMARK_SYSTEM,
        runs=[
            ("zo2p_small", RunConfig(
                algorithm="zo2p_pg", step_size=1e-4, iterations=12, samples=10, radius=1e-4
            )),
            ("svrpg_small", RunConfig(
                algorithm="svrpg", step_size=1e-4, epochs=3, inner_steps=4,
                samples=10, inner_samples=5, outer_radius=1e-4, inner_radius=5e-2,
            )),
        ],
        seeds=list(seeds),
        output_dir=tmp_path / "out",
        emit_svg=emit_svg,
    )


class TestRunExperiment:
    def test_outputs_and_summary(self, tmp_path):
        config = _tiny_experiment(tmp_path, emit_svg=True)
        summary = harness.run_experiment(config)
        out = config.output_dir
        for label in ("zo2p_small", "svrpg_small"):
            for seed in (0, 1):
                assert (out / f"{label}_seed{seed}.csv").exists()
            assert (out / f"{label}_median.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "normalized_gap.svg").exists()

        assert summary["labels"]["zo2p_small"]["cost_evaluations"] == 2 * 12 * 10
        assert summary["labels"]["zo2p_small"]["two_point_queries"] == 12 * 10
        assert summary["labels"]["svrpg_small"]["cost_evaluations"] == 2 * 3 * 10 + 2 * 3 * 4 * 5
        assert summary["labels"]["svrpg_small"]["two_point_queries"] == 3 * 10
        assert summary["labels"]["svrpg_small"]["termination_counts"] == {"completed": 2}
        assert summary["all_completed"] is True

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        first = _tiny_experiment(tmp_path / "a")
        second = _tiny_experiment(tmp_path / "b")
        harness.run_experiment(first)
        harness.run_experiment(second)
        for name in ("zo2p_small_seed0.csv", "svrpg_small_seed1.csv", "zo2p_small_median.csv"):
            assert (first.output_dir / name).read_bytes() == (
                second.output_dir / name
            ).read_bytes()

    def test_median_curve_matches_manual_median(self, tmp_path):
        config = _tiny_experiment(tmp_path, seeds=(0, 1, 2))
        harness.run_experiment(config)
        per_seed = [
            harness.read_trace_csv(config.output_dir / f"zo2p_small_seed{s}.csv")
            for s in (0, 1, 2)
        ]
        lines = (config.output_dir / "zo2p_small_median.csv").read_text().splitlines()
        assert lines[0] == "global_step,median_normalized_gap,median_cost"
        row = lines[-1].split(",")
        step = int(row[0])
        expected = float(np.median([t[-1].normalized_gap for t in per_seed]))
        assert all(t[-1].global_step == step for t in per_seed)
        assert float(row[1]) == pytest.approx(expected, rel=1e-15)

    def test_empty_seed_list_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            _tiny_experiment(tmp_path, seeds=())

    def test_duplicate_labels_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig(
                system_path=BENCHMARK_SYSTEM,
                runs=[
                    ("same", RunConfig(algorithm="exact_pg", step_size=1e-4, iterations=1)),
                    ("same", RunConfig(algorithm="exact_pg", step_size=1e-4, iterations=2)),
                ],
                seeds=[0],
                output_dir=tmp_path,
            )

    def test_svg_is_wellformed_polyline_chart(self, tmp_path):
        config = _tiny_experiment(tmp_path, emit_svg=True)
        harness.run_experiment(config)
        text = (config.output_dir / "normalized_gap.svg").read_text()
        assert text.startswith("<svg")
        assert text.count("<polyline") == 2
        assert "zo2p_small" in text and "svrpg_small" in text
        assert "median normalized gap" in text


class TestExperimentFileLoading:
    def test_load_with_overrides(self, tmp_path):
        experiment = {
            "system": str(BENCHMARK_SYSTEM),
            "seeds": [0, 1, 2],
            "output_dir": "results",
            "runs": [
                {"label": "exact", "algorithm": "exact_pg", "step_size": 1e-4, "iterations": 3}
            ],
        }
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(experiment))
        config = harness.load_experiment(
            path, seed_override=9, output_dir_override=tmp_path / "custom", emit_svg_override=True
        )
        assert config.seeds == [9]
        assert config.output_dir == tmp_path / "custom"
        assert config.emit_svg is True
        assert config.runs[0][0] == "exact"

    def test_label_required(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({
            "system": str(BENCHMARK_SYSTEM), "seeds": [0],
            "runs": [{"algorithm": "exact_pg", "step_size": 1e-4, "iterations": 1}],
        }))
        with pytest.raises(ConfigError):
            harness.load_experiment(path)


class TestCli:
    def test_solve_reports_stable_optimum(self, capsys):
        assert cli.main(["solve", str(BENCHMARK_SYSTEM)]) == 0
        out = capsys.readouterr().out
        rho_line = next(line for line in out.splitlines() if "rho" in line)
        assert float(rho_line.split(":")[1]) < 1.0
        assert "initial excess cost" in out

    def test_solve_scalar_closed_form(self, tmp_path, capsys):
        path = tmp_path / "scalar.json"
        path.write_text(json.dumps({"A": [[0.5]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]}))
        assert cli.main(["solve", str(path)]) == 0
        out = capsys.readouterr().out
        gain_line = next(line for line in out.splitlines() if "K*" in line)
        assert "0.265564" in gain_line

    def test_solve_zero_dynamics(self, tmp_path, capsys):
        path = tmp_path / "zero.json"
        path.write_text(json.dumps({"A": [[0.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]}))
        assert cli.main(["solve", str(path)]) == 0
        assert "[[0]]" in capsys.readouterr().out

    def test_run_subcommand(self, tmp_path, capsys):
        experiment = {
            "system": str(BENCHMARK_SYSTEM),
            "seeds": [0, 1],
            "runs": [{
                "label": "quick", "algorithm": "zo2p_pg", "step_size": 1e-4,
                "iterations": 5, "samples": 6, "radius": 1e-4,
            }],
        }
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(experiment))
        code = cli.main(["run", str(path), "--output-dir", str(tmp_path / "out"), "--svg"])
        assert code == 0
        assert (tmp_path / "out" / "quick_seed0.csv").exists()
        assert (tmp_path / "out" / "normalized_gap.svg").exists()
        assert "evaluations=60" in capsys.readouterr().out

    def test_probe_subcommand(self, tmp_path, capsys):
        probe = {
            "system": str(BENCHMARK_SYSTEM),
            "probe": "bias",
            "radius": 1e-2,
            "samples": 2000,
            "seed": 11,
        }
        path = tmp_path / "probe.json"
        path.write_text(json.dumps(probe))
        code = cli.main(["probe", str(path), "--output-dir", str(tmp_path / "reports")])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["name"] == "estimator_bias"
        assert (tmp_path / "reports" / "probe_estimator_bias.json").exists()

    def test_error_paths_exit_nonzero(self, tmp_path, capsys):
        missing = tmp_path / "missing.json"
        assert cli.main(["solve", str(missing)]) == 2
        assert "error:" in capsys.readouterr().err
