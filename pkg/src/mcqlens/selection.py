"""Refinement strategies: drop easy distractors, remove suspect pairs, presets.

A pair is flagged as mislabeled when its answer-confidence mean falls below a
threshold: the model never learned to prefer the designated answer. It is
flagged for a false-negative distractor when some distractor is not
confidently wrong, its confidence mean staying below a threshold (such
distractors track the answer's score, hovering near 0.5). Removal strategies
compose as a set union. On top of pair removal, the difficult-choice strategy
hardens each surviving pair by dropping the distractor the model rejects most
confidently.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

from .data import Dataset, DynamicsRecord, QAPair
from .errors import ArityError, ConfigError, CoverageError, IntegrityError
from .dynamics import partition_regions

REGION_CHOICES = ("easy", "ambiguous", "hard", "none")
FALSE_NEGATIVE_RULES = ("distractor-floor", "answer-gap")


@dataclass(frozen=True)
class SelectionConfig:
    """Thresholds, fractions and strategy toggles for one refinement run.

    ``false_negative_rule`` picks between flagging when the least-confident
    distractor sits below the threshold ("distractor-floor", default) and
    flagging when the answer's confidence is within the threshold of the most
    confident distractor ("answer-gap", an alternative reading kept for
    comparison).
    """

    mislabeled_threshold: float = 0.4
    false_negative_threshold: float = 0.6
    region_fraction: float = 1.0
    difficult_choice: bool = False
    mislabeled: bool = False
    false_negative: bool = False
    region: str = "none"
    rng_seed: int = 0
    false_negative_rule: str = "distractor-floor"

    def __post_init__(self):
        if not 0.0 < self.mislabeled_threshold < 1.0:
            raise ConfigError("mislabeled_threshold must be in (0, 1)")
        if not 0.0 < self.false_negative_threshold < 1.0:
            raise ConfigError("false_negative_threshold must be in (0, 1)")
        if not 0.0 < self.region_fraction <= 1.0:
            raise ConfigError("region_fraction must be in (0, 1]")
        if self.region not in REGION_CHOICES:
            raise ConfigError(f"region must be one of {REGION_CHOICES}, got {self.region!r}")
        if self.false_negative_rule not in FALSE_NEGATIVE_RULES:
            raise ConfigError(
                f"false_negative_rule must be one of {FALSE_NEGATIVE_RULES},"
                f" got {self.false_negative_rule!r}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "SelectionConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown selection config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "SelectionConfig":
        return cls.from_dict(json.loads(text))


def flag_mislabeled(record: DynamicsRecord, threshold: float) -> bool:
    """True when the answer's confidence mean is below the threshold."""
    return record.answer_confidence_mean < threshold


def flag_false_negative(
    record: DynamicsRecord, threshold: float, rule: str = "distractor-floor"
) -> bool:
    """True when some distractor is not confidently wrong (see module docs)."""
    means = record.per_distractor_confidence_mean
    if not means:
        raise ValueError(f"record {record.pair_id!r} has no distractor confidences")
    if rule == "distractor-floor":
        return min(means) < threshold
    if rule == "answer-gap":
        return abs(record.answer_confidence_mean - max(means)) < threshold
    raise ConfigError(f"unknown false_negative_rule {rule!r}")


def drop_easy_distractor(pair: QAPair, record: DynamicsRecord) -> QAPair:
    """Remove the distractor with the highest confidence mean (ties: lowest
    option index). The answer is kept and its index remapped; aligned
    provenance loses the dropped entry."""
    if pair.m < 3:
        raise ArityError(f"pair {pair.pair_id!r}: needs at least 3 options to drop one")
    if record.pair_id != pair.pair_id:
        raise IntegrityError(f"record {record.pair_id!r} does not match pair {pair.pair_id!r}")
    means = record.per_distractor_confidence_mean
    if len(means) != pair.m - 1:
        raise IntegrityError(
            f"pair {pair.pair_id!r}: {len(means)} distractor confidences for {pair.m} options"
        )
    best = 0
    for i in range(1, len(means)):
        if means[i] > means[best]:
            best = i
    drop_index = pair.distractor_indices()[best]
    options = tuple(o for i, o in enumerate(pair.options) if i != drop_index)
    answer_index = pair.answer_index - (1 if drop_index < pair.answer_index else 0)
    provenance = pair.provenance
    if provenance is not None and len(provenance) == pair.m:
        provenance = tuple(p for i, p in enumerate(provenance) if i != drop_index)
    return QAPair(
        pair_id=pair.pair_id,
        question=pair.question,
        options=options,
        answer_index=answer_index,
        provenance=provenance,
    )


@dataclass(frozen=True)
class SelectionReport:
    """Counts, ratios against the full dataset, and per-strategy id lists."""

    counts: dict[str, int]
    ratios: dict[str, float]
    mislabeled_ids: tuple[str, ...]
    false_negative_ids: tuple[str, ...]
    mixed_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "ratios": dict(self.ratios),
            "mislabeled_ids": list(self.mislabeled_ids),
            "false_negative_ids": list(self.false_negative_ids),
            "mixed_ids": list(self.mixed_ids),
        }

    def table(self) -> str:
        """Count-and-percent table over the drop strategies."""
        rows = [
            ("Mislabeled", self.counts["dropped_mislabeled"]),
            ("False-Neg.", self.counts["dropped_false_negative"]),
            ("Mixed Strategy", self.counts["dropped_mixed"]),
            ("Options removed", self.counts["options_removed"]),
            ("Retained", self.counts["retained"]),
            ("Total", self.counts["total"]),
        ]
        width = max(len(name) for name, _ in rows)
        total = self.counts["total"]
        lines = [f"{'Strategy':<{width}}  {'Count':>8}  {'Ratio':>8}"]
        for name, count in rows:
            ratio = count / total if total else 0.0
            lines.append(f"{name:<{width}}  {count:>8d}  {ratio:>7.2%}")
        return "\n".join(lines)


def apply_selection(
    dataset: Dataset, records: list[DynamicsRecord], cfg: SelectionConfig
) -> tuple[Dataset, SelectionReport]:
    """Run region restriction, pair removal, then difficult-choice dropping.

    The order matters for the data accounting: the region keeps
    floor(fraction * N) pairs, flagged pairs are removed from that subset,
    and option dropping applies to what survives. Pairs with fewer than three
    options pass through the difficult-choice step unchanged.
    """
    by_id = {r.pair_id: r for r in records}
    missing = [p.pair_id for p in dataset if p.pair_id not in by_id]
    if missing:
        raise CoverageError(
            f"dynamics records missing for {len(missing)} pairs"
            f" (first: {missing[:5]})"
        )
    pairs = list(dataset.pairs)
    if cfg.region != "none":
        keep = partition_regions(
            [by_id[p.pair_id] for p in pairs], cfg.region_fraction, cfg.region
        )
        pairs = [p for p in pairs if p.pair_id in keep]
    region_kept = len(pairs)

    mislabeled: set[str] = set()
    false_negative: set[str] = set()
    if cfg.mislabeled:
        mislabeled = {
            p.pair_id
            for p in pairs
            if flag_mislabeled(by_id[p.pair_id], cfg.mislabeled_threshold)
        }
    if cfg.false_negative:
        false_negative = {
            p.pair_id
            for p in pairs
            if flag_false_negative(
                by_id[p.pair_id], cfg.false_negative_threshold, cfg.false_negative_rule
            )
        }
    dropped = mislabeled | false_negative
    survivors = [p for p in pairs if p.pair_id not in dropped]

    options_removed = 0
    refined: list[QAPair] = []
    for pair in survivors:
        if cfg.difficult_choice and pair.m >= 3:
            refined.append(drop_easy_distractor(pair, by_id[pair.pair_id]))
            options_removed += 1
        else:
            refined.append(pair)

    total = len(dataset)
    counts = {
        "total": total,
        "region_kept": region_kept,
        "dropped_mislabeled": len(mislabeled),
        "dropped_false_negative": len(false_negative),
        "dropped_mixed": len(dropped),
        "options_removed": options_removed,
        "retained": len(refined),
    }
    ratios = {name: (count / total if total else 0.0) for name, count in counts.items()}
    report = SelectionReport(
        counts=counts,
        ratios=ratios,
        mislabeled_ids=tuple(sorted(mislabeled)),
        false_negative_ids=tuple(sorted(false_negative)),
        mixed_ids=tuple(sorted(dropped)),
    )
    metadata = {**dataset.metadata, "selection": cfg.to_dict()}
    return Dataset(tuple(refined), metadata), report


# ---------------------------------------------------------------------------
# Presets

_PRESETS: dict[str, dict] = {
    "easy": dict(region="easy", region_fraction=0.5),
    "ambiguous": dict(region="ambiguous", region_fraction=0.5),
    "hard": dict(region="hard", region_fraction=0.5),
    "mislabeled": dict(mislabeled=True),
    "false-negative": dict(false_negative=True),
    "mixed": dict(mislabeled=True, false_negative=True),
    "difficult-choice": dict(difficult_choice=True),
    "difficult-mislabeled": dict(difficult_choice=True, mislabeled=True),
    "difficult-false-negative": dict(difficult_choice=True, false_negative=True),
    "difficult-mixed": dict(difficult_choice=True, mislabeled=True, false_negative=True),
    "hard-difficult-choice": dict(region="hard", region_fraction=0.5, difficult_choice=True),
    "hard-mislabeled": dict(
        region="hard", region_fraction=0.5, difficult_choice=True, mislabeled=True
    ),
    "hard-false-negative": dict(
        region="hard", region_fraction=0.5, difficult_choice=True, false_negative=True
    ),
    "hard-mixed": dict(
        region="hard",
        region_fraction=0.5,
        difficult_choice=True,
        mislabeled=True,
        false_negative=True,
    ),
}


def preset(name: str) -> SelectionConfig:
    """A named selection pipeline; see :func:`preset_names`."""
    try:
        kwargs = _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; known presets: {', '.join(sorted(_PRESETS))}"
        ) from None
    return SelectionConfig(**kwargs)


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))
