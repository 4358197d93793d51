import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcqlens.data import CheckpointScoreMatrix, Dataset, QAPair
from mcqlens.errors import CoverageError
from mcqlens.toycorpus import separable_corpus
from mcqlens.toyscorer import (
    ToyModel,
    TrainRun,
    evaluate_accuracy,
    masked_sequence_score,
    mrl_loss,
    mrl_subgradient,
    score_pair,
    train_toy_model,
)

# ---------------------------------------------------------------------------
# masked sequence scoring


def test_probability_one_scores_zero():
    model = ToyModel(("only",), {"only": 2.0})
    assert masked_sequence_score(["only"], model) == pytest.approx(0.0, abs=1e-12)


def test_uniform_model_closed_form():
    model = ToyModel(("a", "b", "c", "d"))
    score = masked_sequence_score(["a", "b"], model)
    assert score == pytest.approx(-math.log(0.25), abs=1e-12)


def test_doubling_weights_leaves_scores_unchanged():
    weights = {"a": 1.5, "b": 0.7, "c": 3.2}
    model = ToyModel(("a", "b", "c"), weights)
    doubled = ToyModel(("a", "b", "c"), {k: 2 * v for k, v in weights.items()})
    for seq in (["a"], ["a", "b"], ["c", "c", "b"]):
        assert masked_sequence_score(seq, model) == pytest.approx(
            masked_sequence_score(seq, doubled), abs=1e-12
        )


def test_empty_sequence_is_domain_error():
    model = ToyModel(("a",))
    with pytest.raises(ValueError, match="empty"):
        masked_sequence_score([], model)


def test_oov_token_uses_smoothing_floor():
    model = ToyModel(("a",), {"a": 3.0}, alpha=0.5)
    expected = -math.log(0.5 / 3.5)
    assert masked_sequence_score(["zzz"], model) == pytest.approx(expected, abs=1e-12)


def test_scores_are_non_negative():
    model = ToyModel(("a", "b"), {"a": 10.0, "b": 0.1})
    for seq in (["a"], ["b"], ["a", "b"]):
        assert masked_sequence_score(seq, model) >= 0.0


def test_bag_of_tokens_permutation_covariance():
    # Token order cannot matter for a unigram scorer; this is a property of
    # the toy model, not of masked scoring in general.
    model = ToyModel(("a", "b", "c"), {"a": 1.0, "b": 2.0, "c": 3.0})
    seq = ["a", "c", "b", "c"]
    reordered = ["c", "b", "c", "a"]
    assert masked_sequence_score(seq, model) == pytest.approx(
        masked_sequence_score(reordered, model), abs=1e-12
    )


def test_probabilities_sum_to_one():
    model = ToyModel(tuple("abcdef"), {c: i + 0.25 for i, c in enumerate("abcdef")})
    assert abs(model.probabilities().sum() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# marginal ranking loss


def test_mrl_direct_evaluation():
    assert mrl_loss((1.0, 2.0, 1.2), 0, margin=1.0) == pytest.approx(0.4, abs=1e-12)


def test_mrl_zero_when_answer_clears_margin():
    assert mrl_loss((0.0, 1.5, 2.0, 3.0), 0, margin=1.0) == 0.0


def test_mrl_equal_scores_equals_margin():
    assert mrl_loss((2.0, 2.0, 2.0), 0, margin=1.0) == pytest.approx(1.0, abs=1e-12)


def test_mrl_inverted_variant_flips_direction():
    scores = (1.0, 3.0, 3.0)
    assert mrl_loss(scores, 0, margin=1.0) == 0.0
    # inverted hinge: max(0, 1 - 1 + 3) per distractor
    assert mrl_loss(scores, 0, margin=1.0, lower_answer=False) == pytest.approx(3.0)


@given(
    st.lists(st.floats(min_value=0.0, max_value=20.0), min_size=2, max_size=6),
    st.floats(min_value=-10.0, max_value=10.0),
)
@settings(max_examples=200)
def test_mrl_translation_invariance(scores, shift):
    answer_index = 0
    base = mrl_loss(scores, answer_index)
    shifted = mrl_loss([s + shift for s in scores], answer_index)
    assert shifted == pytest.approx(base, abs=1e-9)


def _fd_gradient(scores, answer_index, margin, h=1e-6):
    scores = np.asarray(scores, dtype=np.float64)
    grad = np.empty_like(scores)
    for i in range(scores.size):
        up = scores.copy()
        up[i] += h
        down = scores.copy()
        down[i] -= h
        grad[i] = (mrl_loss(up, answer_index, margin) - mrl_loss(down, answer_index, margin)) / (
            2 * h
        )
    return grad


def test_mrl_subgradient_matches_finite_differences():
    rng = np.random.default_rng(123)
    checked = 0
    while checked < 300:
        m = int(rng.integers(2, 6))
        scores = rng.uniform(0, 5, size=m)
        answer_index = int(rng.integers(m))
        margin = float(rng.uniform(0.2, 2.0))
        hinge_margins = [
            margin + scores[answer_index] - scores[i] for i in range(m) if i != answer_index
        ]
        if min(abs(h) for h in hinge_margins) < 1e-3:
            continue  # too close to a kink for finite differences
        analytic = mrl_subgradient(scores, answer_index, margin)
        numeric = _fd_gradient(scores, answer_index, margin)
        np.testing.assert_allclose(analytic, numeric, atol=1e-6)
        checked += 1


# ---------------------------------------------------------------------------
# training


def _tiny_dataset():
    return Dataset(
        (
            QAPair("p1", "alpha beta", ("gamma delta", "epsilon zeta", "eta theta"), 0),
            QAPair("p2", "alpha iota", ("kappa", "gamma delta", "mu nu"), 1),
        )
    )


def test_zero_learning_rate_logs_initial_scores():
    dataset = _tiny_dataset()
    model = ToyModel.from_dataset(dataset, learning_rate=0.0)
    initial = {p.pair_id: score_pair(p, model) for p in dataset}
    _, log = train_toy_model(dataset, TrainRun(epochs=1), model=model)
    assert len(log) == 1
    for pair_id, vec in log[0].scores.items():
        assert vec == pytest.approx(initial[pair_id], abs=1e-12)


def test_training_is_deterministic():
    dataset = separable_corpus(100, rng_seed=2)
    run = TrainRun(epochs=5, rng_seed=4)
    model_a, log_a = train_toy_model(dataset, run)
    model_b, log_b = train_toy_model(dataset, run)
    assert all(log_a[e].scores == log_b[e].scores for e in range(5))
    assert np.array_equal(model_a.weights, model_b.weights)


def test_training_does_not_mutate_passed_model():
    dataset = _tiny_dataset()
    model = ToyModel.from_dataset(dataset)
    before = model.weights.copy()
    train_toy_model(dataset, TrainRun(epochs=2), model=model)
    assert np.array_equal(model.weights, before)


def test_separable_corpus_accuracy_grows(separable_run):
    dataset, _, log = separable_run
    accuracies = [evaluate_accuracy(mat, dataset) for mat in log]
    assert all(b >= a for a, b in zip(accuracies, accuracies[1:]))
    assert accuracies[-1] >= 0.9


def test_checkpoint_indices_are_contiguous(separable_run):
    _, _, log = separable_run
    assert [m.checkpoint_index for m in log] == [1, 2, 3, 4, 5]


def test_empty_dataset_rejected():
    with pytest.raises(ValueError, match="empty"):
        train_toy_model(Dataset(()), TrainRun(epochs=1))


# ---------------------------------------------------------------------------
# accuracy evaluation


def test_accuracy_all_answers_minimal():
    dataset = _tiny_dataset()
    matrix = CheckpointScoreMatrix(1, {"p1": (0.1, 2.0, 3.0), "p2": (2.0, 0.5, 3.0)})
    assert evaluate_accuracy(matrix, dataset) == 1.0


def test_accuracy_all_answers_maximal():
    dataset = _tiny_dataset()
    matrix = CheckpointScoreMatrix(1, {"p1": (5.0, 2.0, 3.0), "p2": (2.0, 9.0, 3.0)})
    assert evaluate_accuracy(matrix, dataset) == 0.0


def test_accuracy_ties_count_as_incorrect():
    dataset = Dataset((QAPair("p1", "q", ("a", "b"), 0),))
    matrix = CheckpointScoreMatrix(1, {"p1": (1.0, 1.0)})
    assert evaluate_accuracy(matrix, dataset) == 0.0


def test_accuracy_coverage_gap_raises():
    dataset = _tiny_dataset()
    matrix = CheckpointScoreMatrix(1, {"p1": (1.0, 2.0, 3.0)})
    with pytest.raises(CoverageError):
        evaluate_accuracy(matrix, dataset)


def test_accuracy_random_scores_near_chance():
    rng = np.random.default_rng(77)
    pairs = tuple(
        QAPair(f"p{i}", "q", (f"a{i}", f"b{i}", f"c{i}"), int(rng.integers(3)))
        for i in range(1000)
    )
    dataset = Dataset(pairs)
    matrix = CheckpointScoreMatrix(
        1, {p.pair_id: tuple(rng.uniform(0, 1, size=3)) for p in pairs}
    )
    assert abs(evaluate_accuracy(matrix, dataset) - 1 / 3) <= 0.05
