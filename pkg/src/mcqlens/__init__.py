"""Checkpoint-dynamics diagnostics and refinement for multiple-choice QA data."""

__version__ = "0.1.0"

from .data import (
    CheckpointScoreMatrix,
    Dataset,
    DynamicsRecord,
    KnowledgeTriple,
    QAPair,
    read_dataset,
    read_score_log,
    read_score_log_lenient,
    write_dataset,
    write_score_log,
)
from .dynamics import (
    GapDensity,
    PerCheckpointConfidence,
    aggregate_dynamics,
    answer_confidence,
    checkpoint_confidences,
    confidence_gap_density,
    distractor_confidence,
    pair_confidence,
    partition_regions,
    read_dynamics,
    softmax_answer_confidence,
    write_dynamics,
)
from .selection import (
    SelectionConfig,
    SelectionReport,
    apply_selection,
    drop_easy_distractor,
    flag_false_negative,
    flag_mislabeled,
    preset,
    preset_names,
)
from .synthesis import (
    SynthesisConfig,
    TemplateRegistry,
    build_dataset,
    read_triples,
    render_question,
    sample_distractors,
)
from .toyscorer import (
    ToyModel,
    TrainRun,
    evaluate_accuracy,
    masked_sequence_score,
    mrl_loss,
    mrl_subgradient,
    train_toy_model,
)
from .toycorpus import PlantedCorpus, planted_corpus, separable_corpus
