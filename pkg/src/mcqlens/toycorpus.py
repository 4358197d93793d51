"""Synthetic toy corpora with controllable difficulty and planted faults.

These corpora drive the desk-scale trainer in tests and experiment scripts.
Options are built from disjoint token pools whose corpus frequencies fix their
plausibility under a frequency-based scorer:

* ``separable_corpus`` gives answers and distractors equal initial frequency,
  so a run starts near chance and separates as training raises the answer
  tokens' weights.
* ``planted_corpus`` uses three option tiers (strong answers, mediocre
  distractors, junk distractors) and then plants faults: answer-swapped pairs
  exchange the answer text with the junk distractor, so the labeled option
  scores worse than both remaining distractors; paraphrase pairs replace the
  mediocre distractor with fresh answer-tier tokens, a distractor that is
  effectively correct.

Token draws use fixed rotations through each pool, so per-token frequencies
(and with them the planted margins) are deterministic; randomness only
shuffles pools, option positions, and fault placement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, QAPair


def _letters(i: int, width: int = 3) -> str:
    out = []
    for _ in range(width):
        out.append(chr(ord("a") + i % 26))
        i //= 26
    return "".join(reversed(out))


def _pool(prefix: str, size: int, rng: np.random.Generator) -> list[str]:
    tokens = [f"{prefix}{_letters(i)}" for i in range(size)]
    rng.shuffle(tokens)
    return tokens


class _Rotation:
    """Cycle through a pool; every token's draw count stays within one."""

    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.cursor = 0

    def take(self, count: int) -> list[str]:
        out = []
        for _ in range(count):
            out.append(self.tokens[self.cursor % len(self.tokens)])
            self.cursor += 1
        return out


def separable_corpus(n_pairs: int, rng_seed: int = 0, option_count: int = 3) -> Dataset:
    """Pairs whose answers use a token set disjoint from all distractors.

    Answer and distractor tokens start equally frequent, so scores begin near
    ties and a margin trainer separates them.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    if option_count < 2:
        raise ValueError("option_count must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(1,)))
    question_pool = _pool("ctx", 30, rng)
    answer_pool = _pool("good", 30, rng)
    junk_pool = _pool("junk", 30 * (option_count - 1), rng)
    questions = _Rotation(question_pool)
    answers = _Rotation(answer_pool)
    junk = _Rotation(junk_pool)
    pairs = []
    for i in range(n_pairs):
        question = " ".join(questions.take(4))
        options = [" ".join(answers.take(2))]
        for _ in range(option_count - 1):
            options.append(" ".join(junk.take(2)))
        positions = rng.permutation(option_count)
        shuffled = [options[j] for j in positions]
        answer_index = int(np.where(positions == 0)[0][0])
        pairs.append(
            QAPair(
                pair_id=f"p{i:05d}",
                question=question,
                options=tuple(shuffled),
                answer_index=answer_index,
            )
        )
    metadata = {"kind": "separable", "rng_seed": rng_seed, "option_count": option_count}
    return Dataset(tuple(pairs), metadata)


@dataclass(frozen=True)
class PlantedCorpus:
    """A three-option corpus plus the ids of its planted faults."""

    dataset: Dataset
    answer_swapped: frozenset[str]
    paraphrased: frozenset[str]


def planted_corpus(
    n_pairs: int = 600,
    swap_fraction: float = 0.05,
    paraphrase_fraction: float = 0.05,
    rng_seed: int = 0,
) -> PlantedCorpus:
    """Healthy three-tier pairs with planted mislabeled and false-negative faults.

    Healthy pairs hold (answer, mediocre distractor, junk distractor).
    ``swap_fraction`` of pairs have the answer text exchanged with the junk
    distractor: the labeled option is then worse than both distractors, and
    the true answer lingers as a distractor. ``paraphrase_fraction`` of pairs
    replace the mediocre distractor with fresh answer-tier tokens.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    n_swap = int(round(n_pairs * swap_fraction))
    n_para = int(round(n_pairs * paraphrase_fraction))
    if n_swap + n_para > n_pairs:
        raise ValueError("fault fractions exceed the corpus size")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(2,)))
    questions = _Rotation(_pool("ctx", 20, rng))
    answers = _Rotation(_pool("ans", 40, rng))
    mediocre = _Rotation(_pool("mid", 240, rng))
    junk = _Rotation(_pool("junk", 1200, rng))

    chosen = rng.choice(n_pairs, size=n_swap + n_para, replace=False)
    swap_rows = set(int(i) for i in chosen[:n_swap])
    para_rows = set(int(i) for i in chosen[n_swap:])

    pairs = []
    swapped_ids, paraphrased_ids = [], []
    for i in range(n_pairs):
        question = " ".join(questions.take(2))
        answer_text = " ".join(answers.take(4))
        mid_text = " ".join(mediocre.take(4))
        junk_text = " ".join(junk.take(4))
        options = [answer_text, mid_text, junk_text]
        pair_id = f"p{i:05d}"
        if i in swap_rows:
            options[0], options[2] = options[2], options[0]
            swapped_ids.append(pair_id)
        elif i in para_rows:
            options[1] = " ".join(answers.take(4))
            paraphrased_ids.append(pair_id)
        positions = rng.permutation(3)
        shuffled = [options[j] for j in positions]
        answer_index = int(np.where(positions == 0)[0][0])
        pairs.append(
            QAPair(
                pair_id=pair_id,
                question=question,
                options=tuple(shuffled),
                answer_index=answer_index,
            )
        )
    metadata = {
        "kind": "planted",
        "rng_seed": rng_seed,
        "n_pairs": n_pairs,
        "answer_swapped": len(swapped_ids),
        "paraphrased": len(paraphrased_ids),
    }
    return PlantedCorpus(
        dataset=Dataset(tuple(pairs), metadata),
        answer_swapped=frozenset(swapped_ids),
        paraphrased=frozenset(paraphrased_ids),
    )
