"""A desk-scale sequence scorer and margin trainer that emits checkpoint logs.

The model is a smoothed global token-frequency scorer: a sequence's score is
the average negative log-likelihood of its tokens under one shared unigram
distribution. It is deliberately tiny; its only job is to produce genuinely
evolving checkpoint score logs for the dynamics pipeline without any ML
framework. Because it is a bag-of-tokens model, scores are invariant to token
order (a property of this model, not of masked scoring in general).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections import Counter
from typing import Sequence

import numpy as np

from .data import CheckpointScoreMatrix, Dataset
from .errors import CoverageError
from .text import tokenize

_WEIGHT_FLOOR = 1e-9


class ToyModel:
    """Smoothed token-frequency scorer with trainable per-token weights.

    ``token_weights`` are positive reals; a token's probability is its weight
    over the total. Out-of-vocabulary tokens fall back to a floor of
    ``alpha / (total + alpha)``. Scores are invariant to rescaling all
    weights by a common factor.
    """

    def __init__(self, vocabulary, token_weights=None, alpha: float = 0.5,
                 learning_rate: float = 0.3):
        vocabulary = tuple(dict.fromkeys(vocabulary))
        if not vocabulary:
            raise ValueError("vocabulary is empty")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        self.vocabulary = vocabulary
        self._index = {tok: i for i, tok in enumerate(vocabulary)}
        if token_weights is None:
            weights = np.ones(len(vocabulary), dtype=np.float64)
        else:
            weights = np.array([float(token_weights[t]) for t in vocabulary], dtype=np.float64)
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("token weights must be positive and finite")
        self.weights = weights
        self.alpha = float(alpha)
        self.learning_rate = float(learning_rate)

    @classmethod
    def from_dataset(cls, dataset: Dataset, alpha: float = 0.5,
                     learning_rate: float = 0.3) -> "ToyModel":
        """Initialize from smoothed corpus counts over questions and options.

        Weights are rescaled to mean 1 so that additive update steps are
        well-conditioned regardless of corpus size; scores are unaffected.
        """
        counts: Counter[str] = Counter()
        for pair in dataset:
            counts.update(tokenize(pair.question))
            for option in pair.options:
                counts.update(tokenize(option))
        if not counts:
            raise ValueError("dataset yields an empty vocabulary")
        vocabulary = tuple(sorted(counts))
        weights = {t: counts[t] + alpha for t in vocabulary}
        model = cls(vocabulary, weights, alpha=alpha, learning_rate=learning_rate)
        model.weights /= model.weights.mean()
        return model

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def token_probability(self, token: str) -> float:
        total = self.total_weight
        i = self._index.get(token)
        if i is None:
            return self.alpha / (total + self.alpha)
        return float(self.weights[i]) / total

    def probabilities(self) -> np.ndarray:
        """In-vocabulary token distribution; sums to 1."""
        return self.weights / self.weights.sum()

    def token_weights(self) -> dict[str, float]:
        return {tok: float(w) for tok, w in zip(self.vocabulary, self.weights)}

    def copy(self) -> "ToyModel":
        clone = ToyModel(self.vocabulary, alpha=self.alpha, learning_rate=self.learning_rate)
        clone.weights = self.weights.copy()
        return clone


def masked_sequence_score(tokens: Sequence[str], model: ToyModel) -> float:
    """Average negative log-likelihood of the tokens, in nats.

    Non-negative, finite, and lower for sequences the model finds more
    plausible. Raises ValueError on an empty sequence.
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot score an empty token sequence")
    total = model.total_weight
    log_total = math.log(total)
    acc = 0.0
    for tok in tokens:
        i = model._index.get(tok)
        if i is None:
            acc += math.log(model.alpha) - math.log(total + model.alpha)
        else:
            acc += math.log(model.weights[i]) - log_total
    return -acc / len(tokens)


def score_pair(pair, model: ToyModel) -> tuple[float, ...]:
    """Score each question + option sequence of a pair."""
    question_tokens = tokenize(pair.question)
    return tuple(
        masked_sequence_score(question_tokens + tokenize(option), model)
        for option in pair.options
    )


# ---------------------------------------------------------------------------
# Marginal ranking loss


def mrl_loss(scores, answer_index: int, margin: float = 1.0, lower_answer: bool = True) -> float:
    """Mean hinge over distractors: max(0, margin + S_answer - S_distractor).

    Zero exactly when the answer's score is below every distractor's by at
    least ``margin``. ``lower_answer=False`` flips the sign convention so the
    hinge drives the answer's score above the distractors instead
    (compatibility variant; not what the selection rule expects).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise ValueError("need at least two options")
    if margin <= 0:
        raise ValueError("margin must be positive")
    s_answer = scores[answer_index]
    rest = np.delete(scores, answer_index)
    if lower_answer:
        hinges = np.maximum(0.0, margin + s_answer - rest)
    else:
        hinges = np.maximum(0.0, margin - s_answer + rest)
    return float(hinges.mean())


def mrl_subgradient(scores, answer_index: int, margin: float = 1.0,
                    lower_answer: bool = True) -> np.ndarray:
    """Subgradient of :func:`mrl_loss` with respect to each score."""
    scores = np.asarray(scores, dtype=np.float64)
    m = scores.size
    grad = np.zeros(m, dtype=np.float64)
    s_answer = scores[answer_index]
    denom = m - 1
    sign = 1.0 if lower_answer else -1.0
    for i in range(m):
        if i == answer_index:
            continue
        if sign * (s_answer - scores[i]) + margin > 0.0:
            grad[answer_index] += sign / denom
            grad[i] -= sign / denom
    return grad


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainRun:
    """Settings for one toy training run; one checkpoint is logged per epoch."""

    epochs: int = 5
    margin: float = 1.0
    rng_seed: int = 0
    lower_answer: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.margin <= 0:
            raise ValueError("margin must be positive")


class _IndexedPair:
    """Token-index view of one pair for fast repeated scoring."""

    __slots__ = ("pair_id", "answer_index", "option_idx", "in_vocab_idx", "oov", "lengths")

    def __init__(self, pair, model: ToyModel):
        self.pair_id = pair.pair_id
        self.answer_index = pair.answer_index
        question_tokens = tokenize(pair.question)
        self.option_idx = []
        self.in_vocab_idx = []
        self.oov = []
        self.lengths = []
        for option in pair.options:
            tokens = question_tokens + tokenize(option)
            if not tokens:
                raise ValueError(f"pair {pair.pair_id!r}: option sequence has no tokens")
            indexed = [model._index[t] for t in tokens if t in model._index]
            self.in_vocab_idx.append(np.array(indexed, dtype=np.intp))
            self.oov.append(len(tokens) - len(indexed))
            self.lengths.append(len(tokens))
            opt_indexed = [model._index[t] for t in tokenize(option) if t in model._index]
            self.option_idx.append(np.array(opt_indexed, dtype=np.intp))

    def scores(self, model: ToyModel) -> np.ndarray:
        total = model.total_weight
        log_total = math.log(total)
        out = np.empty(len(self.lengths), dtype=np.float64)
        for i, idx in enumerate(self.in_vocab_idx):
            acc = float(np.log(model.weights[idx]).sum()) - len(idx) * log_total
            if self.oov[i]:
                acc += self.oov[i] * (math.log(model.alpha) - math.log(total + model.alpha))
            out[i] = -acc / self.lengths[i]
        return out


def train_toy_model(dataset: Dataset, run: TrainRun, model: ToyModel | None = None,
                    alpha: float = 0.5, learning_rate: float = 0.3):
    """Train by per-pair subgradient steps on the ranking loss.

    Each epoch first scores every pair with the current weights and appends
    one checkpoint matrix to the log, then sweeps the pairs in a seeded
    random order, updating the weights of each pair's option tokens. Returns
    (final model, list of E checkpoint matrices). Deterministic for a fixed
    seed.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if model is None:
        model = ToyModel.from_dataset(dataset, alpha=alpha, learning_rate=learning_rate)
    else:
        model = model.copy()
    indexed = [_IndexedPair(pair, model) for pair in dataset]
    log: list[CheckpointScoreMatrix] = []
    for epoch in range(1, run.epochs + 1):
        snapshot = {ip.pair_id: tuple(ip.scores(model)) for ip in indexed}
        log.append(CheckpointScoreMatrix(epoch, snapshot))
        order = np.random.default_rng(
            np.random.SeedSequence(run.rng_seed, spawn_key=(epoch,))
        ).permutation(len(indexed))
        for pos in order:
            ip = indexed[int(pos)]
            score_grad = mrl_subgradient(
                ip.scores(model), ip.answer_index, run.margin, run.lower_answer
            )
            for i, g in enumerate(score_grad):
                if g == 0.0:
                    continue
                idx = ip.option_idx[i]
                if idx.size == 0:
                    continue
                # dS/dw for an option token is -1/(n * w); the log-partition
                # terms cancel because the score coefficients sum to zero.
                step = model.learning_rate * g / ip.lengths[i]
                np.add.at(model.weights, idx, step / model.weights[idx])
                np.maximum(model.weights, _WEIGHT_FLOOR, out=model.weights)
    return model, log


def evaluate_accuracy(matrix: CheckpointScoreMatrix, dataset: Dataset) -> float:
    """Fraction of pairs whose unique lowest-scoring option is the answer.

    Ties at the minimum count as incorrect. Raises CoverageError when the
    matrix misses a pair.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    correct = 0
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
        s = np.asarray(vec)
        s_answer = s[pair.answer_index]
        others = np.delete(s, pair.answer_index)
        if np.all(others > s_answer):
            correct += 1
    return correct / len(dataset)
