"""Planted synthetic AS2 data for lexical-scorer experiments.

Questions are grouped into topics that share vocabulary, so lexical QQ scores
find same-topic training rows. Each question has one positive candidate that
repeats most of the question's tokens; negatives are mostly filler, and with
probability ``distractor_rate`` one negative borrows question tokens too.

Run ``python -m qagraph.synthetic OUT.jsonl`` to write a file.
"""

from __future__ import annotations

import argparse

import numpy as np

from qagraph.dataset import AnswerCandidate, Dataset, Question, write_jsonl


def make_planted_dataset(
    n_train: int = 60,
    n_test: int = 20,
    n_dev: int = 0,
    n_candidates: int = 5,
    n_topics: int | None = None,
    distractor_rate: float = 0.3,
    seed: int = 0,
    name: str = "planted",
) -> Dataset:
    if n_candidates < 2:
        raise ValueError("need at least one positive and one negative candidate")
    rng = np.random.default_rng(seed)
    n_topics = n_topics or max(1, n_test + n_dev)
    topic_words = [[f"t{t}w{k}" for k in range(8)] for t in range(n_topics)]
    filler = [f"f{k}" for k in range(400)]

    splits = ["train"] * n_train + ["dev"] * n_dev + ["test"] * n_test
    questions, cands = [], []
    for i, split in enumerate(splits):
        topic = i % n_topics
        q_tokens = list(rng.choice(topic_words[topic], size=4, replace=False))
        q_tokens += [f"q{i}x{j}" for j in range(2)]
        qid = f"{split[:2]}{i:04d}"
        questions.append(Question(qid, " ".join(q_tokens), split))

        pos_slot = int(rng.integers(n_candidates))
        distractor_slot = -1
        if rng.random() < distractor_rate:
            distractor_slot = int(rng.choice([k for k in range(n_candidates) if k != pos_slot]))
        for k in range(n_candidates):
            if k == pos_slot:
                keep = int(rng.integers(5, 7))
                toks = list(rng.choice(q_tokens, size=keep, replace=False))
                toks += list(rng.choice(filler, size=int(rng.integers(0, 2)), replace=False))
                label = 1
            elif k == distractor_slot:
                keep = int(rng.integers(4, 7))
                toks = list(rng.choice(q_tokens, size=keep, replace=False))
                toks += list(rng.choice(filler, size=int(rng.integers(0, 2)), replace=False))
                label = 0
            else:
                toks = list(rng.choice(q_tokens, size=int(rng.integers(0, 3)), replace=False))
                toks += list(rng.choice(filler, size=int(rng.integers(3, 6)), replace=False))
                label = 0
            rng.shuffle(toks)
            cands.append(AnswerCandidate(f"{qid}a{k}", qid, " ".join(toks), label))
    return Dataset(tuple(questions), tuple(cands), name=name)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description="Write a planted synthetic AS2 dataset as JSONL.")
    p.add_argument("out")
    p.add_argument("--train", type=int, default=60)
    p.add_argument("--dev", type=int, default=0)
    p.add_argument("--test", type=int, default=20)
    p.add_argument("--candidates", type=int, default=5)
    p.add_argument("--distractor-rate", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    ds = make_planted_dataset(args.train, args.test, args.dev, args.candidates,
                              distractor_rate=args.distractor_rate, seed=args.seed)
    write_jsonl(ds, args.out)


if __name__ == "__main__":
    main()
