from pathlib import Path

import pytest

from mcqlens.dynamics import aggregate_dynamics
from mcqlens.toycorpus import planted_corpus, separable_corpus
from mcqlens.toyscorer import TrainRun, train_toy_model

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def planted_run():
    """Planted-fault corpus trained for 5 epochs, with aggregated records."""
    corpus = planted_corpus(600, rng_seed=7)
    _, log = train_toy_model(corpus.dataset, TrainRun(epochs=5, rng_seed=7), learning_rate=0.2)
    records = aggregate_dynamics(log, corpus.dataset)
    return corpus, log, records


@pytest.fixture(scope="session")
def separable_run():
    """A 500-pair separable corpus trained for 5 epochs."""
    dataset = separable_corpus(500, rng_seed=11)
    model, log = train_toy_model(dataset, TrainRun(epochs=5, rng_seed=11))
    return dataset, model, log
