#!/usr/bin/env python3
"""Plant answer-swap and paraphrase faults, train, and measure flag recovery.

Sweeps the two flag thresholds around their defaults and prints
precision/recall for each, against the planted fault sets.
"""

import argparse

from mcqlens.dynamics import aggregate_dynamics
from mcqlens.selection import flag_false_negative, flag_mislabeled
from mcqlens.toycorpus import planted_corpus
from mcqlens.toyscorer import TrainRun, train_toy_model


def precision_recall(flagged: set, planted: frozenset) -> tuple[float, float]:
    if not flagged:
        return 0.0, 0.0
    hit = len(flagged & planted)
    return hit / len(flagged), hit / len(planted)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=600)
    parser.add_argument("--swap", type=float, default=0.05)
    parser.add_argument("--paraphrase", type=float, default=0.05)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--learning-rate", type=float, default=0.2)
    args = parser.parse_args()

    corpus = planted_corpus(args.pairs, args.swap, args.paraphrase, rng_seed=args.seed)
    _, log = train_toy_model(
        corpus.dataset,
        TrainRun(epochs=args.epochs, rng_seed=args.seed),
        learning_rate=args.learning_rate,
    )
    records = aggregate_dynamics(log, corpus.dataset)

    print(f"{args.pairs} pairs, {len(corpus.answer_swapped)} answer-swapped,"
          f" {len(corpus.paraphrased)} paraphrased, E={args.epochs}")
    print()
    print(f"{'tau':>5}  {'mislabeled P/R':>16}  {'false-negative P/R':>20}")
    for tau_m, tau_fn in [(0.3, 0.5), (0.4, 0.6), (0.5, 0.7)]:
        mis = {r.pair_id for r in records if flag_mislabeled(r, tau_m)}
        fn = {r.pair_id for r in records if flag_false_negative(r, tau_fn)}
        mis_p, mis_r = precision_recall(mis, corpus.answer_swapped)
        fn_p, fn_r = precision_recall(fn, corpus.paraphrased)
        print(f"{tau_m:>5.2f}  {mis_p:>7.2f}/{mis_r:<8.2f}  {fn_p:>9.2f}/{fn_r:<10.2f}"
              f"  (tau_fn={tau_fn:.2f}, flagged {len(mis)}/{len(fn)})")
    print()
    print("note: every answer-swapped pair also contains the displaced true answer")
    print("as a distractor, so the false-negative flag catches both plant kinds.")


if __name__ == "__main__":
    main()
