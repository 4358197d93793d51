"""Domain types and the line-oriented file formats shared by every stage.

Conventions, repo-wide:

* Option scores are average masked negative log-likelihoods in nats. They are
  non-negative and lower means the model finds the sequence more plausible.
  Every probability derived from them uses ``exp(-score)``.
* Dataset and score-log files are UTF-8 JSONL, one self-describing record per
  line. See ``docs/formats.md`` for the frozen schemas.
* All types here are immutable after construction and safe to share across
  threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CoverageError, IntegrityError, ParseError


@dataclass(frozen=True)
class KnowledgeTriple:
    """A (head, relation, tail) record from a source knowledge base.

    Head and tail are stripped of surrounding whitespace and must be
    non-empty afterwards. Whether the relation tag is registered is checked
    against a template registry at synthesis time, not here.
    """

    head: str
    relation: str
    tail: str
    source_id: str

    def __post_init__(self):
        object.__setattr__(self, "head", self.head.strip())
        object.__setattr__(self, "tail", self.tail.strip())
        if not self.head:
            raise ValueError(f"triple {self.source_id!r}: head is empty")
        if not self.tail:
            raise ValueError(f"triple {self.source_id!r}: tail is empty")


@dataclass(frozen=True)
class QAPair:
    """A question with an ordered option set and a designated answer index.

    Two options are required at minimum; the dynamics operations additionally
    require three and enforce that at their call sites. ``provenance``, when
    present and of length ``m``, aligns one source id with each option.
    """

    pair_id: str
    question: str
    options: tuple[str, ...]
    answer_index: int
    provenance: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if self.provenance is not None:
            object.__setattr__(self, "provenance", tuple(self.provenance))
        if len(self.options) < 2:
            raise ValueError(
                f"pair {self.pair_id!r}: needs at least 2 options, got {len(self.options)}"
            )
        if not 0 <= self.answer_index < len(self.options):
            raise ValueError(
                f"pair {self.pair_id!r}: answer_index {self.answer_index} out of range"
            )
        if len(set(self.options)) != len(self.options):
            raise ValueError(f"pair {self.pair_id!r}: options are not pairwise distinct")

    @property
    def m(self) -> int:
        return len(self.options)

    @property
    def answer(self) -> str:
        return self.options[self.answer_index]

    def distractor_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.options)) if i != self.answer_index)


@dataclass(frozen=True)
class CheckpointScoreMatrix:
    """Per-pair option-sequence scores at one training checkpoint.

    ``scores`` maps pair_id to the m-vector of sequence scores, in option
    order. Checkpoint indices start at 1.
    """

    checkpoint_index: int
    scores: dict[str, tuple[float, ...]]

    def __post_init__(self):
        if self.checkpoint_index < 1:
            raise ValueError("checkpoint_index starts at 1")
        normalized = {}
        for pair_id, vec in self.scores.items():
            vec = tuple(float(v) for v in vec)
            if not vec:
                raise ValueError(f"pair {pair_id!r}: empty score vector")
            if not all(math.isfinite(v) for v in vec):
                raise ValueError(f"pair {pair_id!r}: non-finite score")
            normalized[pair_id] = vec
        object.__setattr__(self, "scores", normalized)


@dataclass(frozen=True)
class DynamicsRecord:
    """Across-checkpoint aggregates for one pair.

    The ``*_mean`` fields are means over the E checkpoints. The ``*_var``
    fields hold variability, the population standard deviation across
    checkpoints (divisor E, so zero when E == 1). The per-distractor vectors
    follow option order with the answer position removed.
    """

    pair_id: str
    answer_confidence_mean: float
    answer_confidence_var: float
    per_distractor_confidence_mean: tuple[float, ...]
    per_distractor_confidence_var: tuple[float, ...]
    pair_confidence_mean: float
    pair_confidence_var: float
    softmax_answer_confidence_mean: float

    def __post_init__(self):
        object.__setattr__(
            self,
            "per_distractor_confidence_mean",
            tuple(float(v) for v in self.per_distractor_confidence_mean),
        )
        object.__setattr__(
            self,
            "per_distractor_confidence_var",
            tuple(float(v) for v in self.per_distractor_confidence_var),
        )
        if len(self.per_distractor_confidence_mean) != len(self.per_distractor_confidence_var):
            raise ValueError(f"pair {self.pair_id!r}: distractor vector lengths differ")


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of QA pairs with unique pair ids."""

    pairs: tuple[QAPair, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        index: dict[str, QAPair] = {}
        for pair in self.pairs:
            if pair.pair_id in index:
                raise IntegrityError(f"duplicate pair_id {pair.pair_id!r}")
            index[pair.pair_id] = pair
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[QAPair]:
        return iter(self.pairs)

    def by_id(self, pair_id: str) -> QAPair:
        return self._index[pair_id]

    def __contains__(self, pair_id: str) -> bool:
        return pair_id in self._index

    def pair_ids(self) -> tuple[str, ...]:
        return tuple(p.pair_id for p in self.pairs)


# ---------------------------------------------------------------------------
# JSONL plumbing


def _iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for each non-blank line, 1-based."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(path, lineno, "record is not an object")
            yield lineno, obj


def _require(path, lineno: int, obj: dict, key: str, kind, kindname: str):
    if key not in obj:
        raise ParseError(path, lineno, f"field {key!r}: missing")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParseError(path, lineno, f"field {key!r}: expected {kindname}")
    return value


def _meta_path(path) -> Path:
    return Path(f"{path}.meta.json")


# ---------------------------------------------------------------------------
# Dataset files


def _pair_from_obj(path, lineno: int, obj: dict) -> QAPair:
    pair_id = _require(path, lineno, obj, "pair_id", str, "a string")
    question = _require(path, lineno, obj, "question", str, "a string")
    options = _require(path, lineno, obj, "options", list, "an array")
    if not all(isinstance(o, str) for o in options):
        raise ParseError(path, lineno, "field 'options': expected an array of strings")
    answer_index = _require(path, lineno, obj, "answer_index", int, "an integer")
    provenance = obj.get("provenance")
    if provenance is not None:
        if not isinstance(provenance, list) or not all(isinstance(p, str) for p in provenance):
            raise ParseError(path, lineno, "field 'provenance': expected an array of strings")
        provenance = tuple(provenance)
    try:
        return QAPair(
            pair_id=pair_id,
            question=question,
            options=tuple(options),
            answer_index=answer_index,
            provenance=provenance,
        )
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from exc


def read_dataset(path) -> Dataset:
    """Read a dataset JSONL file, validating every record.

    Raises :class:`ParseError` (with the line number) for malformed records
    and :class:`IntegrityError` for duplicate pair ids. A sidecar
    ``<path>.meta.json`` file, when present, populates ``metadata``.
    """
    pairs: list[QAPair] = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_jsonl(path):
        pair = _pair_from_obj(path, lineno, obj)
        if pair.pair_id in seen:
            raise IntegrityError(
                f"{path}:{lineno}: duplicate pair_id {pair.pair_id!r}"
                f" (first seen on line {seen[pair.pair_id]})"
            )
        seen[pair.pair_id] = lineno
        pairs.append(pair)
    metadata: dict = {}
    meta_path = _meta_path(path)
    if meta_path.exists():
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
    return Dataset(tuple(pairs), metadata)


def write_dataset(dataset: Dataset, path, write_sidecar: bool = True) -> None:
    """Write a dataset as JSONL; non-empty metadata goes to a ``.meta.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for pair in dataset:
            obj = {
                "pair_id": pair.pair_id,
                "question": pair.question,
                "options": list(pair.options),
                "answer_index": pair.answer_index,
            }
            if pair.provenance is not None:
                obj["provenance"] = list(pair.provenance)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    if write_sidecar and dataset.metadata:
        _meta_path(path).write_text(
            json.dumps(dataset.metadata, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )


# ---------------------------------------------------------------------------
# Score-log files


def _score_record_from_obj(path, lineno: int, obj: dict) -> tuple[int, str, tuple[float, ...]]:
    checkpoint = _require(path, lineno, obj, "checkpoint", int, "an integer")
    if checkpoint < 1:
        raise ParseError(path, lineno, "field 'checkpoint': must be >= 1")
    pair_id = _require(path, lineno, obj, "pair_id", str, "a string")
    scores = _require(path, lineno, obj, "scores", list, "an array")
    vec = []
    for v in scores:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(path, lineno, "field 'scores': expected an array of finite numbers")
        vec.append(float(v))
    if not vec:
        raise ParseError(path, lineno, "field 'scores': empty array")
    return checkpoint, pair_id, tuple(vec)


def _read_score_records(path, dataset: Dataset):
    """Parse and cross-check records; returns {checkpoint: {pair_id: vector}}."""
    by_checkpoint: dict[int, dict[str, tuple[float, ...]]] = {}
    for lineno, obj in _iter_jsonl(path):
        checkpoint, pair_id, vec = _score_record_from_obj(path, lineno, obj)
        if pair_id not in dataset:
            raise ParseError(path, lineno, f"unknown pair_id {pair_id!r}")
        expected = dataset.by_id(pair_id).m
        if len(vec) != expected:
            raise ParseError(
                path,
                lineno,
                f"pair {pair_id!r}: score vector has length {len(vec)}, expected {expected}",
            )
        bucket = by_checkpoint.setdefault(checkpoint, {})
        if pair_id in bucket:
            raise IntegrityError(
                f"{path}:{lineno}: duplicate record for pair {pair_id!r}"
                f" at checkpoint {checkpoint}"
            )
        bucket[pair_id] = vec
    return by_checkpoint


def _matrices_from_buckets(dataset: Dataset, by_checkpoint) -> list[CheckpointScoreMatrix]:
    matrices = []
    for checkpoint in sorted(by_checkpoint):
        bucket = by_checkpoint[checkpoint]
        # Normalize to dataset order so downstream writes are deterministic.
        ordered = {p.pair_id: bucket[p.pair_id] for p in dataset if p.pair_id in bucket}
        matrices.append(CheckpointScoreMatrix(checkpoint, ordered))
    return matrices


def read_score_log(path, dataset: Dataset) -> list[CheckpointScoreMatrix]:
    """Read a score log strictly: contiguous checkpoints 1..E, full coverage.

    Raises :class:`CoverageError` on checkpoint gaps or missing pairs, and
    :class:`ParseError` / :class:`IntegrityError` for record-level problems.
    """
    by_checkpoint = _read_score_records(path, dataset)
    if not by_checkpoint:
        raise CoverageError(f"{path}: score log contains no records")
    indices = sorted(by_checkpoint)
    expected = list(range(1, len(indices) + 1))
    if indices != expected:
        missing = sorted(set(expected) - set(indices))
        raise CoverageError(
            f"{path}: checkpoint indices {indices} are not contiguous from 1"
            + (f" (missing {missing})" if missing else "")
        )
    gaps = []
    for checkpoint in indices:
        bucket = by_checkpoint[checkpoint]
        for pair in dataset:
            if pair.pair_id not in bucket:
                gaps.append((pair.pair_id, checkpoint))
    if gaps:
        shown = ", ".join(f"({p}, {e})" for p, e in gaps[:10])
        raise CoverageError(
            f"{path}: {len(gaps)} missing (pair, checkpoint) entries: {shown}"
            + (", ..." if len(gaps) > 10 else "")
        )
    return _matrices_from_buckets(dataset, by_checkpoint)


def read_score_log_lenient(path, dataset: Dataset):
    """Read a score log tolerating gaps; returns (matrices, coverage).

    ``coverage`` maps pair_id to the sorted tuple of checkpoint indices that
    actually contain it. Record-level problems still raise.
    """
    by_checkpoint = _read_score_records(path, dataset)
    coverage: dict[str, tuple[int, ...]] = {p.pair_id: () for p in dataset}
    for checkpoint in sorted(by_checkpoint):
        for pair_id in by_checkpoint[checkpoint]:
            coverage[pair_id] = coverage[pair_id] + (checkpoint,)
    return _matrices_from_buckets(dataset, by_checkpoint), coverage


def write_score_log(matrices: Iterable[CheckpointScoreMatrix], path) -> None:
    """Write checkpoint matrices as score-log JSONL, ordered by checkpoint."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for matrix in sorted(matrices, key=lambda mat: mat.checkpoint_index):
            for pair_id, vec in matrix.scores.items():
                obj = {
                    "checkpoint": matrix.checkpoint_index,
                    "pair_id": pair_id,
                    "scores": list(vec),
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Structural validation (no dataset required; collects diagnostics, never raises)


def validate_dataset_file(path) -> list[str]:
    """Diagnose a dataset file line by line; returns [] when valid."""
    diagnostics: list[str] = []
    seen: dict[str, int] = {}
    try:
        for lineno, obj in _iter_jsonl(path):
            try:
                pair = _pair_from_obj(path, lineno, obj)
            except ParseError as exc:
                diagnostics.append(str(exc))
                continue
            if pair.pair_id in seen:
                diagnostics.append(
                    f"{path}:{lineno}: duplicate pair_id {pair.pair_id!r}"
                    f" (first seen on line {seen[pair.pair_id]})"
                )
            else:
                seen[pair.pair_id] = lineno
    except ParseError as exc:
        diagnostics.append(str(exc))
    return diagnostics


def validate_score_log_file(path) -> tuple[list[str], dict]:
    """Diagnose a score-log file; returns (diagnostics, summary counts)."""
    diagnostics: list[str] = []
    arity: dict[str, int] = {}
    seen: set[tuple[int, str]] = set()
    checkpoints: set[int] = set()
    records = 0
    try:
        for lineno, obj in _iter_jsonl(path):
            try:
                checkpoint, pair_id, vec = _score_record_from_obj(path, lineno, obj)
            except ParseError as exc:
                diagnostics.append(str(exc))
                continue
            records += 1
            checkpoints.add(checkpoint)
            if (checkpoint, pair_id) in seen:
                diagnostics.append(
                    f"{path}:{lineno}: duplicate record for pair {pair_id!r}"
                    f" at checkpoint {checkpoint}"
                )
            seen.add((checkpoint, pair_id))
            if pair_id in arity and arity[pair_id] != len(vec):
                diagnostics.append(
                    f"{path}:{lineno}: pair {pair_id!r} changes arity from"
                    f" {arity[pair_id]} to {len(vec)}"
                )
            arity.setdefault(pair_id, len(vec))
    except ParseError as exc:
        diagnostics.append(str(exc))
    if not records:
        diagnostics.append(f"{path}: score log contains no records")
    elif sorted(checkpoints) != list(range(1, len(checkpoints) + 1)):
        diagnostics.append(
            f"{path}: checkpoint indices {sorted(checkpoints)} are not contiguous from 1"
        )
    else:
        expected = len(arity)
        for checkpoint in sorted(checkpoints):
            have = sum(1 for c, _ in seen if c == checkpoint)
            if have != expected:
                diagnostics.append(
                    f"{path}: checkpoint {checkpoint} covers {have} of {expected} pairs"
                )
    summary = {
        "checkpoints": len(checkpoints),
        "records": records,
        "pairs": len(arity),
    }
    return diagnostics, summary
