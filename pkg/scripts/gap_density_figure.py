#!/usr/bin/env python3
"""Compare the gap density of the pairwise answer confidence vs the softmax
baseline on a freshly trained toy log, and optionally render the figure."""

import argparse
from pathlib import Path

from mcqlens.dynamics import checkpoint_confidences, confidence_gap_density, gap_band_masses
from mcqlens.toycorpus import separable_corpus
from mcqlens.toyscorer import TrainRun, train_toy_model


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--bins", type=int, default=40)
    parser.add_argument("--svg", help="write the histogram figure here")
    args = parser.parse_args()

    dataset = separable_corpus(args.pairs, rng_seed=args.seed)
    _, log = train_toy_model(dataset, TrainRun(epochs=args.epochs, rng_seed=args.seed))
    rows = []
    for matrix in log:
        rows.extend(checkpoint_confidences(matrix, dataset))

    pairwise, softmax = gap_band_masses(rows, 0.25)
    print(f"{args.pairs} pairs, E={args.epochs}: mass within |gap| <= 0.25")
    print(f"  pairwise confidence: {pairwise:.3f}")
    print(f"  softmax baseline:    {softmax:.3f}")

    density = confidence_gap_density(rows, bins=args.bins)
    if args.svg:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plt.rcParams["svg.hashsalt"] = "mcqlens"
        centers = [
            (density.bin_edges[i] + density.bin_edges[i + 1]) / 2
            for i in range(args.bins)
        ]
        width = density.bin_edges[1] - density.bin_edges[0]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar(centers, density.pairwise_mass, width=width, alpha=0.6, label="pairwise")
        ax.bar(centers, density.softmax_mass, width=width, alpha=0.6, label="softmax")
        ax.set_xlabel("answer confidence - distractor confidence")
        ax.set_ylabel("mass")
        ax.legend()
        fig.tight_layout()
        Path(args.svg).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(args.svg, format="svg", metadata={"Date": None})
        print(f"figure written to {args.svg}")


if __name__ == "__main__":
    main()
