#!/usr/bin/env python3
"""Reference wiring of a masked-language scorer into a logging session.

Illustrative only. The "model" is a smoothed token-count table over the
dataset file: each token's masked loss is the negative log of its count share,
and a sequence's score is the mean per-token loss (the quantity the score-log
format expects). Between checkpoints the answer tokens' counts are boosted a
little to imitate a model that is learning.

The point is the shape of the integration, not the model: replace
``CountScorer`` with calls into a real training stack and keep the session
code as is.
"""

import argparse
import json
import math
import re
from collections import Counter

from scorehook import finalize, log_checkpoint, manifest_from_dataset_file, open_session

_WORD = re.compile(r"[a-z]+")


def _tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


class CountScorer:
    """Per-token masked loss from smoothed corpus counts."""

    def __init__(self, dataset_path, alpha: float = 0.5):
        self.sequences: dict[str, list[list[str]]] = {}
        self.answer_index: dict[str, int] = {}
        self.counts: Counter[str] = Counter()
        with open(dataset_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                question = _tokens(obj["question"])
                seqs = [question + _tokens(option) for option in obj["options"]]
                self.sequences[obj["pair_id"]] = seqs
                self.answer_index[obj["pair_id"]] = obj["answer_index"]
                for seq in seqs:
                    self.counts.update(seq)
        self.alpha = alpha

    def masked_token_loss(self, token: str) -> float:
        total = sum(self.counts.values())
        mass = self.counts.get(token, 0) + self.alpha
        return -math.log(mass / (total + self.alpha))

    def __call__(self, pair_id: str) -> list[float]:
        scores = []
        for seq in self.sequences[pair_id]:
            losses = [self.masked_token_loss(tok) for tok in seq]
            scores.append(sum(losses) / len(losses))
        return scores

    def pretend_learning_step(self, boost: float = 1.5) -> None:
        # nudge answer tokens up, as a trained model would
        for pair_id, seqs in self.sequences.items():
            for token in seqs[self.answer_index[pair_id]]:
                self.counts[token] = int(self.counts[token] * boost) + 1


def log_training_run(dataset_path, out_path, checkpoints: int = 3, overwrite: bool = False):
    manifest = manifest_from_dataset_file(dataset_path)
    session = open_session(out_path, manifest, overwrite=overwrite)
    scorer = CountScorer(dataset_path)
    for _ in range(checkpoints):
        log_checkpoint(session, scorer)
        scorer.pretend_learning_step()
    return finalize(session)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("dataset", help="dataset JSONL file")
    parser.add_argument("--out", required=True, help="score-log JSONL to write")
    parser.add_argument("--checkpoints", type=int, default=3)
    parser.add_argument("--overwrite", action="store_true")
    args = parser.parse_args()
    summary = log_training_run(args.dataset, args.out, args.checkpoints, args.overwrite)
    print(f"wrote {summary['records']} records over {summary['checkpoints']} checkpoints"
          f" to {args.out}")


if __name__ == "__main__":
    main()
