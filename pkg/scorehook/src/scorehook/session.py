"""Checkpoint score logging for training loops.

A session owns one score-log file. At every saved checkpoint the caller hands
in a scoring callback; the session asks it for one score vector per manifest
pair, validates the result, and appends one record per pair in the score-log
wire format (JSONL with keys ``checkpoint``, ``pair_id``, ``scores``).

The session never computes scores itself: the callback must return the average
masked negative log-likelihood per option sequence, keeping every
model-framework detail on the caller's side.

Checkpoints are atomic. Records are staged to a temporary file in the log's
directory and appended in a single write only after every pair validated, so a
callback failure or crash mid-checkpoint leaves the log without any partial
checkpoint.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Callable, Mapping, Sequence


class SessionError(Exception):
    """Misuse of a logging session or an invalid callback result."""


ScorerCallback = Callable[[str], Sequence[float]]


def manifest_from_dataset_file(path) -> dict[str, int]:
    """Build {pair_id: option count} from a dataset JSONL file.

    Only the ``pair_id`` and ``options`` keys are consulted.
    """
    manifest: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SessionError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            pair_id = obj.get("pair_id")
            options = obj.get("options")
            if not isinstance(pair_id, str) or not isinstance(options, list):
                raise SessionError(f"{path}:{lineno}: expected pair_id and options")
            if pair_id in manifest:
                raise SessionError(f"{path}:{lineno}: duplicate pair_id {pair_id!r}")
            manifest[pair_id] = len(options)
    return manifest


def _validate_manifest(manifest: Mapping[str, int]) -> dict[str, int]:
    if not manifest:
        raise SessionError("manifest is empty")
    validated: dict[str, int] = {}
    for pair_id, arity in manifest.items():
        if not isinstance(pair_id, str) or not pair_id:
            raise SessionError(f"manifest key {pair_id!r} is not a pair id")
        if not isinstance(arity, int) or isinstance(arity, bool) or arity < 2:
            raise SessionError(f"pair {pair_id!r}: arity must be an integer >= 2")
        validated[pair_id] = arity
    return validated


class LoggerSession:
    """One writer, one log file; create via :func:`open_session`."""

    def __init__(self, path: Path, manifest: dict[str, int]):
        self.path = path
        self.manifest = manifest
        self.checkpoint_index = 0  # last completed checkpoint
        self.records_written = 0
        self._finalized = False

    def log_checkpoint(self, scorer: ScorerCallback) -> int:
        """Score every manifest pair and append one checkpoint atomically.

        Returns the number of records appended. Raises
        :class:`SessionError` (leaving the log untouched) when the callback
        raises, returns the wrong arity, or returns non-finite values.
        """
        if self._finalized:
            raise SessionError("session is finalized")
        next_index = self.checkpoint_index + 1
        lines: list[str] = []
        for pair_id, arity in self.manifest.items():
            try:
                raw = scorer(pair_id)
            except Exception as exc:
                raise SessionError(
                    f"checkpoint {next_index}: scorer failed on pair {pair_id!r}: {exc}"
                ) from exc
            vector = [float(v) for v in raw]
            if len(vector) != arity:
                raise SessionError(
                    f"checkpoint {next_index}: pair {pair_id!r} expects {arity} scores,"
                    f" got {len(vector)}"
                )
            if not all(math.isfinite(v) for v in vector):
                raise SessionError(
                    f"checkpoint {next_index}: pair {pair_id!r}: non-finite score"
                )
            lines.append(
                json.dumps(
                    {"checkpoint": next_index, "pair_id": pair_id, "scores": vector},
                    ensure_ascii=False,
                )
            )
        payload = ("\n".join(lines) + "\n").encode("utf-8")

        tmp_path = self.path.with_name(f"{self.path.name}.ckpt{next_index}.tmp")
        with open(tmp_path, "wb") as tmp:
            tmp.write(payload)
            tmp.flush()
            os.fsync(tmp.fileno())
        fd = os.open(self.path, os.O_WRONLY | os.O_APPEND)
        try:
            os.write(fd, payload)
            os.fsync(fd)
        finally:
            os.close(fd)
        tmp_path.unlink()

        self.checkpoint_index = next_index
        self.records_written += len(lines)
        return len(lines)

    def finalize(self) -> dict[str, int]:
        """Close the session; returns {"checkpoints": E, "records": n}."""
        if self._finalized:
            raise SessionError("session already finalized")
        self._finalized = True
        return {"checkpoints": self.checkpoint_index, "records": self.records_written}


def open_session(path, manifest: Mapping[str, int], overwrite: bool = False) -> LoggerSession:
    """Start a logging session at ``path`` for the given dataset manifest.

    The manifest maps pair ids to their option counts. An existing non-empty
    log is refused unless ``overwrite`` is set (sessions never append to logs
    they did not write: checkpoint indices must stay contiguous from 1).
    A ``<path>.manifest.json`` sidecar records the manifest for provenance.
    """
    validated = _validate_manifest(manifest)
    path = Path(path)
    if path.is_file() and path.stat().st_size > 0 and not overwrite:
        raise SessionError(f"{path}: log already exists; pass overwrite=True to replace it")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb"):
            pass
        path.with_name(f"{path.name}.manifest.json").write_text(
            json.dumps({"pairs": validated}, ensure_ascii=False, sort_keys=True, indent=2)
            + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise SessionError(f"{path}: not writable: {exc}") from exc
    return LoggerSession(path, validated)


def log_checkpoint(session: LoggerSession, scorer: ScorerCallback) -> int:
    return session.log_checkpoint(scorer)


def finalize(session: LoggerSession) -> dict[str, int]:
    return session.finalize()
