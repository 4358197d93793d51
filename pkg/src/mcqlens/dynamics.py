"""Option- and pair-level confidence from checkpoint score logs.

All confidences derive from ``exp(-score)``. The answer's confidence is a
pairwise softmax against the second-easiest distractor (the distractor with
the second-lowest score), which keeps a single plausible distractor from
dragging it down. A distractor's confidence is the probability that it is
wrong, one minus its share of the full softmax. The plain softmax over all
options is kept alongside as a baseline.

Across checkpoints each quantity is summarized by its mean and variability
(population standard deviation). Exponentials are computed with max-score
subtraction, so arbitrary finite score scales are safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import CheckpointScoreMatrix, Dataset, DynamicsRecord, _iter_jsonl, _require
from .errors import ArityError, CoverageError, ParseError

REGIONS = ("easy", "ambiguous", "hard")


def _checked(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("scores must be a vector of at least two reals")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s


def softmax_answer_confidence(scores, index: int) -> float:
    """Probability of option ``index`` under the softmax of negated scores."""
    s = _checked(scores)
    if not 0 <= index < s.size:
        raise ValueError(f"index {index} out of range")
    w = np.exp(-(s - s.min()))
    return float(w[index] / w.sum())


def answer_confidence(scores, answer_index: int) -> float:
    """Pairwise confidence of the answer against the second-easiest distractor.

    Requires at least three options; for binary pairs use
    :func:`softmax_answer_confidence` instead. Distractor ranking ties break
    by option index.
    """
    s = _checked(scores)
    if s.size < 3:
        raise ArityError(
            "answer_confidence needs at least 3 options;"
            " use softmax_answer_confidence for binary pairs"
        )
    if not 0 <= answer_index < s.size:
        raise ValueError(f"answer_index {answer_index} out of range")
    distractors = sorted(
        (i for i in range(s.size) if i != answer_index), key=lambda i: (s[i], i)
    )
    second = distractors[1]
    lo = min(s[answer_index], s[second])
    w_answer = math.exp(-(s[answer_index] - lo))
    w_second = math.exp(-(s[second] - lo))
    return w_answer / (w_answer + w_second)


def distractor_confidence(scores, index: int, answer_index: int) -> float:
    """Confidence that the option at ``index`` is wrong: one minus its softmax share."""
    if index == answer_index:
        raise ValueError("index refers to the answer, not a distractor")
    return 1.0 - softmax_answer_confidence(scores, index)


def pair_confidence(scores, answer_index: int) -> float:
    """Mean over distractors of (answer confidence + distractor confidence - 1),
    divided by the option count m rather than m - 1, so the attainable range
    is [-(m-1)/m, (m-1)/m]."""
    s = _checked(scores)
    m = s.size
    answer = answer_confidence(s, answer_index)
    total = 0.0
    for k in range(m):
        if k == answer_index:
            continue
        total += answer + distractor_confidence(s, k, answer_index) - 1.0
    return total / m


@dataclass(frozen=True)
class PerCheckpointConfidence:
    """All confidence quantities for one pair at one checkpoint."""

    pair_id: str
    checkpoint_index: int
    answer_conf: float
    distractor_conf: tuple[float, ...]
    pair_conf: float
    softmax_answer_conf: float


def checkpoint_confidences(
    matrix: CheckpointScoreMatrix, dataset: Dataset
) -> list[PerCheckpointConfidence]:
    """Confidences for every dataset pair at one checkpoint.

    Pairs with only two options fall back to the softmax baseline for the
    answer (and, through it, the pair confidence), since the pairwise form
    needs a second distractor.
    """
    rows = []
    for pair in dataset:
        vec = matrix.scores.get(pair.pair_id)
        if vec is None:
            raise CoverageError(
                f"checkpoint {matrix.checkpoint_index} has no scores for pair {pair.pair_id!r}"
            )
        if len(vec) != pair.m:
            raise CoverageError(
                f"pair {pair.pair_id!r}: scores have length {len(vec)}, expected {pair.m}"
            )
        softmax_conf = softmax_answer_confidence(vec, pair.answer_index)
        dist_conf = tuple(
            distractor_confidence(vec, k, pair.answer_index) for k in pair.distractor_indices()
        )
        if pair.m >= 3:
            ans_conf = answer_confidence(vec, pair.answer_index)
        else:
            ans_conf = softmax_conf
        p_conf = sum(ans_conf + d - 1.0 for d in dist_conf) / pair.m
        rows.append(
            PerCheckpointConfidence(
                pair_id=pair.pair_id,
                checkpoint_index=matrix.checkpoint_index,
                answer_conf=ans_conf,
                distractor_conf=dist_conf,
                pair_conf=p_conf,
                softmax_answer_conf=softmax_conf,
            )
        )
    return rows


def aggregate_dynamics(
    series: list[CheckpointScoreMatrix], dataset: Dataset
) -> list[DynamicsRecord]:
    """Mean and variability of each confidence quantity across checkpoints.

    The series must be complete: contiguous checkpoint indices and every pair
    present at every checkpoint. Variability is the population standard
    deviation (divisor E), zero when E == 1.
    """
    if not series:
        raise CoverageError("empty checkpoint series")
    ordered = sorted(series, key=lambda m: m.checkpoint_index)
    indices = [m.checkpoint_index for m in ordered]
    if indices != list(range(1, len(indices) + 1)):
        raise CoverageError(f"checkpoint indices {indices} are not contiguous from 1")
    missing = [
        (pair.pair_id, mat.checkpoint_index)
        for mat in ordered
        for pair in dataset
        if pair.pair_id not in mat.scores
    ]
    if missing:
        shown = ", ".join(f"({p}, {e})" for p, e in missing[:10])
        raise CoverageError(
            f"{len(missing)} missing (pair, checkpoint) entries: {shown}"
            + (", ..." if len(missing) > 10 else "")
        )
    per_checkpoint = [checkpoint_confidences(mat, dataset) for mat in ordered]
    records = []
    for i, pair in enumerate(dataset):
        rows = [per_checkpoint[e][i] for e in range(len(ordered))]
        ans = np.array([r.answer_conf for r in rows])
        dist = np.array([r.distractor_conf for r in rows])  # (E, m-1)
        pconf = np.array([r.pair_conf for r in rows])
        smax = np.array([r.softmax_answer_conf for r in rows])
        records.append(
            DynamicsRecord(
                pair_id=pair.pair_id,
                answer_confidence_mean=float(ans.mean()),
                answer_confidence_var=float(ans.std()),
                per_distractor_confidence_mean=tuple(dist.mean(axis=0)),
                per_distractor_confidence_var=tuple(dist.std(axis=0)),
                pair_confidence_mean=float(pconf.mean()),
                pair_confidence_var=float(pconf.std()),
                softmax_answer_confidence_mean=float(smax.mean()),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Regions


def partition_regions(records: list[DynamicsRecord], fraction: float, region: str) -> frozenset[str]:
    """Pair ids of the requested learnability region.

    hard: the floor(fraction * N) lowest pair-confidence means; easy: the
    highest; ambiguous: the highest pair-confidence variabilities. Ties break
    by pair_id so the split is deterministic.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    count = int(math.floor(fraction * len(records) + 1e-9))
    if region == "hard":
        key = lambda r: (r.pair_confidence_mean, r.pair_id)
    elif region == "easy":
        key = lambda r: (-r.pair_confidence_mean, r.pair_id)
    else:
        key = lambda r: (-r.pair_confidence_var, r.pair_id)
    return frozenset(r.pair_id for r in sorted(records, key=key)[:count])


def data_map_rows(records: list[DynamicsRecord], fraction: float = 0.5):
    """Scatter-table rows (pair_id, confidence mean, variability, region).

    Regions can overlap; the label applies the precedence hard > easy >
    ambiguous, with "none" for pairs outside all three at this fraction.
    """
    hard = partition_regions(records, fraction, "hard")
    easy = partition_regions(records, fraction, "easy")
    ambiguous = partition_regions(records, fraction, "ambiguous")
    rows = []
    for r in records:
        if r.pair_id in hard:
            label = "hard"
        elif r.pair_id in easy:
            label = "easy"
        elif r.pair_id in ambiguous:
            label = "ambiguous"
        else:
            label = "none"
        rows.append((r.pair_id, r.pair_confidence_mean, r.pair_confidence_var, label))
    return rows


# ---------------------------------------------------------------------------
# Confidence-gap density


@dataclass(frozen=True)
class GapDensity:
    """Two normalized histograms of (answer confidence - distractor confidence)
    over [-1, 1]: one for the pairwise answer confidence, one for the softmax
    baseline."""

    bin_edges: tuple[float, ...]
    pairwise_mass: tuple[float, ...]
    softmax_mass: tuple[float, ...]


def confidence_gaps(rows) -> tuple[np.ndarray, np.ndarray]:
    """Flat gap samples (pairwise series, softmax series), one per distractor.

    Accepts PerCheckpointConfidence rows or DynamicsRecord aggregates.
    """
    pairwise, softmax = [], []
    for row in rows:
        if isinstance(row, DynamicsRecord):
            answer = row.answer_confidence_mean
            baseline = row.softmax_answer_confidence_mean
            dist = row.per_distractor_confidence_mean
        else:
            answer = row.answer_conf
            baseline = row.softmax_answer_conf
            dist = row.distractor_conf
        for d in dist:
            pairwise.append(answer - d)
            softmax.append(baseline - d)
    return np.asarray(pairwise), np.asarray(softmax)


def confidence_gap_density(rows, bins: int = 40) -> GapDensity:
    """Histogram both gap series over [-1, 1]; each series' masses sum to 1."""
    if bins < 2:
        raise ValueError("bins must be at least 2")
    pairwise, softmax = confidence_gaps(rows)
    edges = np.linspace(-1.0, 1.0, bins + 1)

    def mass(values: np.ndarray) -> tuple[float, ...]:
        if values.size == 0:
            return tuple(0.0 for _ in range(bins))
        counts, _ = np.histogram(values, bins=edges)
        return tuple(float(c) / values.size for c in counts)

    return GapDensity(tuple(float(e) for e in edges), mass(pairwise), mass(softmax))


def gap_band_masses(rows, half_width: float = 0.25) -> tuple[float, float]:
    """Fraction of each gap series within |gap| <= half_width, computed on the
    raw samples (no binning)."""
    pairwise, softmax = confidence_gaps(rows)
    if pairwise.size == 0:
        return 0.0, 0.0
    return (
        float(np.mean(np.abs(pairwise) <= half_width)),
        float(np.mean(np.abs(softmax) <= half_width)),
    )


# ---------------------------------------------------------------------------
# Dynamics files

_VECTOR_FIELDS = ("per_distractor_confidence_mean", "per_distractor_confidence_var")
_SCALAR_FIELDS = (
    "answer_confidence_mean",
    "answer_confidence_var",
    "pair_confidence_mean",
    "pair_confidence_var",
    "softmax_answer_confidence_mean",
)


def write_dynamics(records: list[DynamicsRecord], path) -> None:
    """Write dynamics records as JSONL, one record per pair."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "pair_id": r.pair_id,
                "answer_confidence_mean": r.answer_confidence_mean,
                "answer_confidence_var": r.answer_confidence_var,
                "per_distractor_confidence_mean": list(r.per_distractor_confidence_mean),
                "per_distractor_confidence_var": list(r.per_distractor_confidence_var),
                "pair_confidence_mean": r.pair_confidence_mean,
                "pair_confidence_var": r.pair_confidence_var,
                "softmax_answer_confidence_mean": r.softmax_answer_confidence_mean,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _record_from_obj(path, lineno: int, obj: dict) -> DynamicsRecord:
    pair_id = _require(path, lineno, obj, "pair_id", str, "a string")
    values = {}
    for name in _SCALAR_FIELDS:
        raw = obj.get(name)
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not math.isfinite(raw):
            raise ParseError(path, lineno, f"field {name!r}: expected a finite number")
        values[name] = float(raw)
    for name in _VECTOR_FIELDS:
        raw = obj.get(name)
        if not isinstance(raw, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
            for v in raw
        ):
            raise ParseError(path, lineno, f"field {name!r}: expected an array of finite numbers")
        values[name] = tuple(float(v) for v in raw)
    for name in ("answer_confidence_mean", "softmax_answer_confidence_mean"):
        if not 0.0 <= values[name] <= 1.0:
            raise ParseError(path, lineno, f"field {name!r}: out of [0, 1]")
    for name in ("answer_confidence_var", "pair_confidence_var"):
        if values[name] < 0.0:
            raise ParseError(path, lineno, f"field {name!r}: negative")
    if not -1.0 <= values["pair_confidence_mean"] <= 1.0:
        raise ParseError(path, lineno, "field 'pair_confidence_mean': out of [-1, 1]")
    return DynamicsRecord(pair_id=pair_id, **values)


def read_dynamics(path) -> list[DynamicsRecord]:
    """Read a dynamics JSONL file, validating fields and ranges."""
    records = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_jsonl(path):
        record = _record_from_obj(path, lineno, obj)
        if record.pair_id in seen:
            raise ParseError(path, lineno, f"duplicate pair_id {record.pair_id!r}")
        seen[record.pair_id] = lineno
        records.append(record)
    return records


def validate_dynamics_file(path) -> list[str]:
    """Diagnose a dynamics file line by line; returns [] when valid."""
    diagnostics: list[str] = []
    seen: dict[str, int] = {}
    try:
        for lineno, obj in _iter_jsonl(path):
            try:
                record = _record_from_obj(path, lineno, obj)
            except ParseError as exc:
                diagnostics.append(str(exc))
                continue
            if record.pair_id in seen:
                diagnostics.append(f"{path}:{lineno}: duplicate pair_id {record.pair_id!r}")
            else:
                seen[record.pair_id] = lineno
    except ParseError as exc:
        diagnostics.append(str(exc))
    return diagnostics
