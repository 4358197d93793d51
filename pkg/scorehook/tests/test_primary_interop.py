"""Cross-component checks: logs written by scorehook must be accepted by the
mcqlens toolchain through its public command-line interface."""

import json
import re
import subprocess
import sys
from pathlib import Path

import pytest

from scorehook import SessionError, log_checkpoint, manifest_from_dataset_file, open_session

pytest.importorskip("mcqlens")

EXAMPLES = Path(__file__).parents[1] / "examples"
sys.path.insert(0, str(EXAMPLES))

from log_toy_mlm import log_training_run  # noqa: E402


def _mcqlens(*args):
    return subprocess.run(
        [sys.executable, "-m", "mcqlens", *args],
        capture_output=True,
        text=True,
    )


def test_reference_example_log_passes_strict_validation(tmp_path, dataset_path):
    log = tmp_path / "scores.jsonl"
    summary = log_training_run(dataset_path, log, checkpoints=3)
    assert summary == {"checkpoints": 3, "records": 30}

    result = _mcqlens("validate", str(log), "--kind", "scores")
    assert result.returncode == 0, result.stdout + result.stderr
    ok_line = result.stdout.strip().splitlines()[-1]
    assert "OK" in ok_line
    # zero diagnostics: the OK line is the only output
    assert len(result.stdout.strip().splitlines()) == 1

    # summary counts match what the primary side ingested
    counts = {
        key: int(value)
        for value, key in re.findall(r"(\d+) (checkpoints|records|pairs)", ok_line)
    }
    assert counts["checkpoints"] == summary["checkpoints"]
    assert counts["records"] == summary["records"]
    assert counts["pairs"] == 10


def test_reference_example_log_feeds_dynamics(tmp_path, dataset_path):
    log = tmp_path / "scores.jsonl"
    log_training_run(dataset_path, log, checkpoints=3)
    out = tmp_path / "dynamics.jsonl"
    result = _mcqlens("dynamics", str(dataset_path), str(log), "--out", str(out))
    assert result.returncode == 0, result.stdout + result.stderr
    records = [json.loads(line) for line in out.read_text().splitlines() if line.strip()]
    assert len(records) == 10
    assert all(len(r["per_distractor_confidence_mean"]) == 2 for r in records)


def test_crash_injection_leaves_no_partial_checkpoint(tmp_path, dataset_path):
    manifest = manifest_from_dataset_file(dataset_path)
    log = tmp_path / "scores.jsonl"
    session = open_session(log, manifest)
    log_checkpoint(session, lambda pair_id: [1.0, 2.0, 3.0])
    log_checkpoint(session, lambda pair_id: [0.5, 2.0, 3.0])

    calls = {"n": 0}

    def crashing(pair_id):
        calls["n"] += 1
        if calls["n"] > 6:
            raise RuntimeError("simulated crash mid-checkpoint")
        return [0.4, 2.0, 3.0]

    with pytest.raises(SessionError):
        log_checkpoint(session, crashing)

    # the log still holds exactly two complete checkpoints and validates cleanly
    result = _mcqlens("validate", str(log), "--kind", "scores")
    assert result.returncode == 0, result.stdout + result.stderr
    assert "2 checkpoints" in result.stdout
    records = [json.loads(line) for line in log.read_text().splitlines() if line.strip()]
    assert len(records) == 20
    assert {r["checkpoint"] for r in records} == {1, 2}
