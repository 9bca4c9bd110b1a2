"""Small builders shared by the test modules."""

from __future__ import annotations

import itertools

import numpy as np

from qagraph.dataset import AnswerCandidate, Dataset, Question
from qagraph.graph import NodeKind, QaGraph
from qagraph.scoring import Scorer, Scorers, ScoreTable


def make_dataset(layout, name="fixture"):
    """``layout``: iterable of ``(qid, text, split, [(aid, text, label), ...])``."""
    questions, cands = [], []
    for qid, text, split, answers in layout:
        questions.append(Question(qid, text, split))
        for aid, atext, label in answers:
            cands.append(AnswerCandidate(aid, qid, atext, label))
    return Dataset(tuple(questions), tuple(cands), name=name)


def table_scorer(kind, scores, missing="zero"):
    t = ScoreTable(kind)
    for (a, b), s in scores.items():
        t.add(a, b, s)
    return Scorer(kind, table=t, missing=missing)


def table_scorers(qq=None, qa=None, aa=None, missing="zero"):
    return Scorers(
        qq=table_scorer("QQ", qq or {}, missing),
        qa=table_scorer("QA", qa or {}, missing),
        aa=table_scorer("AA", aa or {}, missing),
    )


def random_graph(n, p, rng, weighted=False, name="g"):
    g = QaGraph(name)
    for i in range(n):
        g.add_node(NodeKind.QA_TEST, name, f"a{i}", float(rng.random()))
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            g.add_edge(i, j, float(rng.uniform(0.5, 2.0)) if weighted else 1.0)
    return g


def dense_normalized(graph):
    n = graph.n_nodes
    a = np.eye(n)
    for (i, j), w in graph.edges.items():
        a[i, j] += w
        a[j, i] += w
    d = a.sum(axis=1)
    dm = np.diag(1.0 / np.sqrt(d))
    return dm @ a @ dm


def random_eqag_fixture(rng, max_nodes=30):
    """A target question plus a few train rows, at most ``max_nodes`` candidates in all.

    QA and QQ scores sit on a 0.1 grid so ties are common.
    """
    n_test = int(rng.integers(1, 6))
    budget = max_nodes - n_test
    layout = [("qt", "target", "test", [(f"qta{j}", "x", int(rng.integers(0, 2))) for j in range(n_test)])]
    i = 0
    while budget > 0 and i < 6:
        k = int(rng.integers(1, min(5, budget) + 1))
        layout.append((f"r{i}", f"row {i}", "train",
                     [(f"r{i}a{j}", "y", int(rng.integers(0, 2))) for j in range(k)]))
        budget -= k
        i += 1

    def grid():
        return float(rng.integers(0, 11)) / 10

    ds = make_dataset(layout)
    qa = table_scorer("QA", {(a.question_id, a.id): grid() for a in ds.candidates})
    qq = table_scorer("QQ", {("qt", q.id): grid() for q in ds.questions if q.id != "qt"})
    return ds, qa, qq
