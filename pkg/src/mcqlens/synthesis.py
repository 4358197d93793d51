"""Turn knowledge triples into multiple-choice QA pairs.

Questions come from per-relation templates; the ground-truth option is the
source triple's tail, verbatim. Distractors are tails of other same-relation
triples, accepted only when they share no content keyword with the answer
triple's head or tail and differ textually from every other option.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, KnowledgeTriple, QAPair, _iter_jsonl, _require
from .errors import ConfigError, ParseError, SynthesisError
from .text import DEFAULT_STOPLIST, extract_keywords

REGISTRY_VERSION = "builtin-1"

# Best-effort defaults for six common commonsense relations. They are
# illustrative, not canonical; ship your own registry file to override or
# extend them. "{head}" inlines the full head text, "{subj}" its first word.
DEFAULT_TEMPLATES = {
    "xReact": "{head}. As a result, {subj} felt",
    "xWant": "{head}. As a result, {subj} wanted to",
    "xAttr": "{head}. {subj} is seen as",
    "AtLocation": "You are likely to find a {head} in",
    "Causes": "Something that might happen as a consequence of {head} is",
    "UsedFor": "a {head} is for",
}


@dataclass(frozen=True)
class TemplateRegistry:
    """Relation tag -> question template. The tags form the closed set of
    relations the synthesizer accepts."""

    templates: dict[str, str]
    version: str = REGISTRY_VERSION

    def __post_init__(self):
        if not self.templates:
            raise ConfigError("template registry is empty")
        for relation, template in self.templates.items():
            if not template.strip():
                raise ConfigError(f"empty template for relation {relation!r}")

    def registered(self, relation: str) -> bool:
        return relation in self.templates

    def relations(self) -> tuple[str, ...]:
        return tuple(self.templates)

    @classmethod
    def default(cls) -> "TemplateRegistry":
        return cls(dict(DEFAULT_TEMPLATES))

    @classmethod
    def from_file(cls, path) -> "TemplateRegistry":
        """Load a registry from JSON: either a flat {relation: template} map
        or {"version": ..., "templates": {...}}."""
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: registry file must hold a JSON object")
        if "templates" in obj:
            templates = obj["templates"]
            version = obj.get("version", "custom")
        else:
            templates = obj
            version = "custom"
        if not isinstance(templates, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in templates.items()
        ):
            raise ConfigError(f"{path}: templates must map relation strings to template strings")
        return cls(dict(templates), version=str(version))


@dataclass(frozen=True)
class SynthesisConfig:
    option_count: int = 3
    rng_seed: int = 0
    keyword_stoplist: frozenset[str] = field(default=DEFAULT_STOPLIST)
    max_resample: int = 1000

    def __post_init__(self):
        if self.option_count < 2:
            raise ConfigError("option_count must be at least 2")
        if self.max_resample < 1:
            raise ConfigError("max_resample must be at least 1")
        object.__setattr__(self, "keyword_stoplist", frozenset(self.keyword_stoplist))


def render_question(triple: KnowledgeTriple, registry: TemplateRegistry) -> str:
    """Render the question for a triple. Deterministic in its inputs."""
    try:
        template = registry.templates[triple.relation]
    except KeyError:
        raise ConfigError(
            f"no question template registered for relation {triple.relation!r}"
        ) from None
    subject = triple.head.split()[0]
    question = template.replace("{head}", triple.head).replace("{subj}", subject)
    if not question.strip():
        raise ConfigError(f"template for relation {triple.relation!r} produced an empty question")
    return question


def sample_distractor_triples(
    answer_triple: KnowledgeTriple,
    pool: list[KnowledgeTriple],
    cfg: SynthesisConfig,
    rng: np.random.Generator,
) -> list[KnowledgeTriple]:
    """Pick option_count - 1 same-relation triples whose tails are admissible
    distractors for ``answer_triple``. Scans a shuffled pool, at most
    ``max_resample`` draws."""
    blocked = extract_keywords(answer_triple.head, cfg.keyword_stoplist) | extract_keywords(
        answer_triple.tail, cfg.keyword_stoplist
    )
    candidates = [
        t for t in pool if t.relation == answer_triple.relation and t is not answer_triple
    ]
    needed = cfg.option_count - 1
    chosen: list[KnowledgeTriple] = []
    seen_tails = {answer_triple.tail}
    if candidates:
        order = rng.permutation(len(candidates))
        for draw, idx in enumerate(order):
            if draw >= cfg.max_resample or len(chosen) == needed:
                break
            candidate = candidates[int(idx)]
            if candidate.tail in seen_tails:
                continue
            if extract_keywords(candidate.tail, cfg.keyword_stoplist) & blocked:
                continue
            chosen.append(candidate)
            seen_tails.add(candidate.tail)
    if len(chosen) < needed:
        raise SynthesisError(
            f"triple {answer_triple.source_id!r}: only {len(chosen)} of {needed}"
            f" admissible distractors found within {cfg.max_resample} draws"
        )
    return chosen


def sample_distractors(
    answer_triple: KnowledgeTriple,
    pool: list[KnowledgeTriple],
    cfg: SynthesisConfig,
    rng: np.random.Generator,
) -> list[str]:
    """The admissible distractor tails for ``answer_triple``."""
    return [t.tail for t in sample_distractor_triples(answer_triple, pool, cfg, rng)]


def _triple_rng(seed: int, index: int) -> np.random.Generator:
    # Per-triple stream: output is independent of synthesis order.
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def build_dataset(
    triples: list[KnowledgeTriple],
    registry: TemplateRegistry,
    cfg: SynthesisConfig | None = None,
) -> Dataset:
    """Synthesize one QA pair per triple that renders and samples successfully.

    The answer lands at option index 0 and provenance records the answer
    triple's source id followed by the distractor triples'. Triples that fail
    (missing template, exhausted pool) are skipped and summarized in the
    dataset metadata.
    """
    cfg = cfg or SynthesisConfig()
    triples = list(triples)
    pairs: list[QAPair] = []
    skipped: list[dict] = []
    for index, triple in enumerate(triples):
        rng = _triple_rng(cfg.rng_seed, index)
        try:
            question = render_question(triple, registry)
            chosen = sample_distractor_triples(triple, triples, cfg, rng)
        except (ConfigError, SynthesisError) as exc:
            skipped.append({"index": index, "source_id": triple.source_id, "reason": str(exc)})
            continue
        pairs.append(
            QAPair(
                pair_id=f"q{index:06d}",
                question=question,
                options=(triple.tail, *(t.tail for t in chosen)),
                answer_index=0,
                provenance=(triple.source_id, *(t.source_id for t in chosen)),
            )
        )
    metadata = {
        "registry_version": registry.version,
        "rng_seed": cfg.rng_seed,
        "option_count": cfg.option_count,
        "triples_in": len(triples),
        "pairs_out": len(pairs),
        "skipped": skipped,
    }
    return Dataset(tuple(pairs), metadata)


# ---------------------------------------------------------------------------
# Triple files


def read_triples(path) -> list[KnowledgeTriple]:
    """Read a triples JSONL file (keys head, relation, tail, source_id)."""
    triples = []
    for lineno, obj in _iter_jsonl(path):
        head = _require(path, lineno, obj, "head", str, "a string")
        relation = _require(path, lineno, obj, "relation", str, "a string")
        tail = _require(path, lineno, obj, "tail", str, "a string")
        source_id = _require(path, lineno, obj, "source_id", str, "a string")
        try:
            triples.append(
                KnowledgeTriple(head=head, relation=relation, tail=tail, source_id=source_id)
            )
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from exc
    return triples


def write_triples(triples: list[KnowledgeTriple], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            obj = {"head": t.head, "relation": t.relation, "tail": t.tail, "source_id": t.source_id}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def validate_triples_file(path) -> list[str]:
    """Diagnose a triples file line by line; returns [] when valid."""
    diagnostics: list[str] = []
    try:
        for lineno, obj in _iter_jsonl(path):
            for key in ("head", "relation", "tail", "source_id"):
                if not isinstance(obj.get(key), str):
                    diagnostics.append(f"{path}:{lineno}: field {key!r}: missing or not a string")
                    break
            else:
                if not obj["head"].strip():
                    diagnostics.append(f"{path}:{lineno}: field 'head': empty")
                if not obj["tail"].strip():
                    diagnostics.append(f"{path}:{lineno}: field 'tail': empty")
    except ParseError as exc:
        diagnostics.append(str(exc))
    return diagnostics
