"""Command-line surface: simulate / run / eval / ablate and exit codes."""

import json

import numpy as np
import pytest

from bayescache.cli import main
from bayescache.io import read_results, read_snapshot, read_stream


@pytest.fixture()
def sim_config(tmp_path):
    path = tmp_path / "sim.json"
    path.write_text(json.dumps({
        "format": "sim-config", "version": 1, "task": "recognition",
        "n_images": 120, "proposals_per_image": 1,
        "bank": {"K": 6, "d": 16, "seed": 3},
        "shift": {"prior_skew": [0.3, 0.3, 0.1, 0.1, 0.1, 0.1],
                  "prototype_drift": 0.5, "noise_sigma": 0.2, "seed": 9},
    }))
    return path


def test_simulate_run_eval_round_trip(tmp_path, sim_config, capsys):
    stream = tmp_path / "stream.jsonl"
    assert main(["simulate", "--config", str(sim_config), "--out", str(stream)]) == 0
    header, records = read_stream(stream)
    assert header.K == 6 and len(list(records)) == 120

    results = tmp_path / "out.results.jsonl"
    snapshot = tmp_path / "cache.json"
    code = main([
        "run", "--stream", str(stream), "--tau1", "0.25", "--tau2", "0.6",
        "--results", str(results), "--snapshot-out", str(snapshot),
    ])
    assert code == 0
    loaded = read_results(results)
    assert loaded.n_images == 120
    cache = read_snapshot(snapshot)
    assert len(cache) >= 1

    capsys.readouterr()
    plot = tmp_path / "plot.json"
    assert main(["eval", "--results", str(results),
                 "--segments", "0:0.5,0.5:1", "--format", "csv",
                 "--plot-data", str(plot)]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("lo,hi")
    data = json.loads(plot.read_text())
    assert len(data["cache_trace"]) == 120
    assert len(data["running_accuracy"]) == 120


def test_ablate_writes_summary(tmp_path, sim_config, capsys):
    stream = tmp_path / "stream.jsonl"
    main(["simulate", "--config", str(sim_config), "--out", str(stream)])
    outdir = tmp_path / "ablation"
    code = main(["ablate", "--stream", str(stream),
                 "--variants", "baseline,la,full", "--out", str(outdir)])
    assert code == 0
    summary = (outdir / "summary.csv").read_text()
    assert "baseline" in summary and "full" in summary
    assert (outdir / "full.results.jsonl").exists()


def test_schema_error_exit_code(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format": "stream", "version": 1, "task": "recognition", '
                   '"K": 2, "d": 2}\n{"image_id": "x", "proposals": '
                   '[{"feature": [3.0, 0.0], "init_pred": [0.5, 0.5]}]}\n')
    assert main(["run", "--stream", str(bad)]) == 2


def test_task_contradiction_exit_code(tmp_path, sim_config):
    stream = tmp_path / "stream.jsonl"
    main(["simulate", "--config", str(sim_config), "--out", str(stream)])
    assert main(["run", "--stream", str(stream), "--task", "det"]) == 3


def test_missing_file_is_config_error(tmp_path):
    assert main(["run", "--stream", str(tmp_path / "nope.jsonl")]) == 3


def test_eval_bad_segment_exit_code(tmp_path, sim_config):
    stream = tmp_path / "stream.jsonl"
    results = tmp_path / "r.jsonl"
    main(["simulate", "--config", str(sim_config), "--out", str(stream)])
    main(["run", "--stream", str(stream), "--results", str(results)])
    assert main(["eval", "--results", str(results), "--segments", "zzz"]) == 3
