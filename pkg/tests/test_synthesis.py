import json

import numpy as np
import pytest

from mcqlens.data import KnowledgeTriple
from mcqlens.errors import ConfigError, SynthesisError
from mcqlens.synthesis import (
    SynthesisConfig,
    TemplateRegistry,
    build_dataset,
    read_triples,
    render_question,
    sample_distractors,
    validate_triples_file,
)
from mcqlens.text import extract_keywords


def _rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# question rendering


def test_render_react_question():
    triple = KnowledgeTriple(
        "Flynn is cleaning out Flynn's garage", "xReact", "tired", "t1"
    )
    question = render_question(triple, TemplateRegistry.default())
    assert question == "Flynn is cleaning out Flynn's garage. As a result, Flynn felt"


def test_render_causes_question():
    triple = KnowledgeTriple("watching a movie", "Causes", "inspiration", "t2")
    question = render_question(triple, TemplateRegistry.default())
    assert question == "Something that might happen as a consequence of watching a movie is"


def test_render_is_deterministic():
    triple = KnowledgeTriple("fork", "AtLocation", "kitchen drawer", "t3")
    registry = TemplateRegistry.default()
    assert render_question(triple, registry) == render_question(triple, registry)


def test_render_head_substitution_identity():
    registry = TemplateRegistry({"r": "{head}"})
    triple = KnowledgeTriple("the whole question stem", "r", "tail", "t4")
    assert render_question(triple, registry) == "the whole question stem"


def test_render_missing_template_is_config_error():
    triple = KnowledgeTriple("head", "unknownRel", "tail", "t5")
    with pytest.raises(ConfigError, match="unknownRel"):
        render_question(triple, TemplateRegistry.default())


def test_registry_from_file(tmp_path):
    path = tmp_path / "registry.json"
    path.write_text(json.dumps({"version": "v2", "templates": {"r": "{subj} does"}}))
    registry = TemplateRegistry.from_file(path)
    assert registry.version == "v2"
    assert render_question(KnowledgeTriple("Kim naps", "r", "t", "s"), registry) == "Kim does"


def test_registry_rejects_empty_template():
    with pytest.raises(ConfigError):
        TemplateRegistry({"r": "   "})


# ---------------------------------------------------------------------------
# distractor sampling


def _triples(rows):
    return [KnowledgeTriple(h, r, t, s) for h, r, t, s in rows]


def test_all_candidates_share_keyword_raises():
    answer = KnowledgeTriple("bright star", "r", "night sky", "a0")
    pool = [answer] + _triples(
        [
            ("x", "r", "sky map", "c1"),
            ("y", "r", "star chart", "c2"),
            ("z", "r", "bright lamp", "c3"),
        ]
    )
    cfg = SynthesisConfig(option_count=3)
    with pytest.raises(SynthesisError, match="a0"):
        sample_distractors(answer, pool, cfg, _rng())


def test_single_admissible_tail_for_m2():
    answer = KnowledgeTriple("bright star", "r", "night sky", "a0")
    pool = [answer] + _triples(
        [
            ("x", "r", "sky map", "c1"),
            ("y", "r", "ocean wave", "c2"),
        ]
    )
    cfg = SynthesisConfig(option_count=2)
    assert sample_distractors(answer, pool, cfg, _rng()) == ["ocean wave"]


def test_other_relations_are_ignored():
    answer = KnowledgeTriple("alpha", "r", "beta", "a0")
    pool = [answer] + _triples(
        [
            ("x", "other", "gamma", "c1"),
            ("y", "r", "delta", "c2"),
            ("z", "r", "epsilon", "c3"),
        ]
    )
    cfg = SynthesisConfig(option_count=3)
    tails = sample_distractors(answer, pool, cfg, _rng())
    assert sorted(tails) == ["delta", "epsilon"]


def _toy_pool(n, relation="r"):
    colors = ["red", "blue", "green", "amber", "violet", "teal", "coral", "ivory"]
    animals = ["fox", "crane", "otter", "lynx", "heron", "mole", "bison", "newt"]
    rows = []
    for i in range(n):
        head = f"{colors[i % 8]} {animals[(i // 3) % 8]} story {i}"
        tail = f"{colors[(i * 5 + 2) % 8]} {animals[(i * 7 + 1) % 8]}"
        rows.append((head, relation, tail, f"s{i:05d}"))
    return _triples(rows)


def test_fixed_seed_distractors_are_identical_across_runs():
    pool = _toy_pool(1000)
    cfg = SynthesisConfig(option_count=3)
    answer = pool[17]
    first = sample_distractors(answer, pool, cfg, np.random.default_rng(42))
    second = sample_distractors(answer, pool, cfg, np.random.default_rng(42))
    assert first == second


def test_build_dataset_empty_input():
    dataset = build_dataset([], TemplateRegistry.default(), SynthesisConfig())
    assert len(dataset) == 0
    assert dataset.metadata["pairs_out"] == 0


def test_build_dataset_single_triple(fixtures_dir):
    triples = read_triples(fixtures_dir / "triples.jsonl")
    dataset = build_dataset(triples[:4], TemplateRegistry.default(), SynthesisConfig())
    assert len(dataset) == 4
    assert all(pair.m == 3 for pair in dataset)


def test_build_dataset_skips_unregistered_relations():
    triples = _triples([("head one", "ghost", "tail one", "g1")]) + _toy_pool(6)
    registry = TemplateRegistry({"r": "{head} leads to"})
    dataset = build_dataset(triples, registry, SynthesisConfig(rng_seed=1))
    skipped = dataset.metadata["skipped"]
    assert [s["source_id"] for s in skipped] == ["g1"]
    assert dataset.metadata["pairs_out"] == len(dataset)


def test_build_dataset_postconditions_on_toy_vocabulary():
    """Every produced pair satisfies the sampling rules, checked exhaustively."""
    pool = _toy_pool(2000)
    registry = TemplateRegistry({"r": "{head} leads to"})
    cfg = SynthesisConfig(option_count=3, rng_seed=9)
    dataset = build_dataset(pool, registry, cfg)
    assert len(dataset) > 1500
    by_source = {t.source_id: t for t in pool}
    for pair in dataset:
        assert pair.answer_index == 0
        assert pair.m == 3
        answer_triple = by_source[pair.provenance[0]]
        assert pair.options[0] == answer_triple.tail
        blocked = extract_keywords(answer_triple.head) | extract_keywords(answer_triple.tail)
        assert len(set(pair.options)) == 3
        for opt_index in (1, 2):
            distractor_triple = by_source[pair.provenance[opt_index]]
            assert distractor_triple.relation == answer_triple.relation
            assert pair.options[opt_index] == distractor_triple.tail
            assert not (extract_keywords(pair.options[opt_index]) & blocked)


def test_build_dataset_deterministic_for_seed():
    pool = _toy_pool(300)
    registry = TemplateRegistry({"r": "{head} leads to"})
    cfg = SynthesisConfig(option_count=3, rng_seed=5)
    assert build_dataset(pool, registry, cfg) == build_dataset(pool, registry, cfg)


# ---------------------------------------------------------------------------
# triples file


def test_read_triples_fixture(fixtures_dir):
    triples = read_triples(fixtures_dir / "triples.jsonl")
    assert len(triples) == 24
    assert triples[0].relation == "xReact"


def test_validate_triples_reports_empty_fields(tmp_path):
    path = tmp_path / "triples.jsonl"
    path.write_text(
        '{"head": "h", "relation": "r", "tail": "t", "source_id": "s"}\n'
        '{"head": "  ", "relation": "r", "tail": "t", "source_id": "s2"}\n'
    )
    diagnostics = validate_triples_file(path)
    assert len(diagnostics) == 1 and ":2:" in diagnostics[0]
