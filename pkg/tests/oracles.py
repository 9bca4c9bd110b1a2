"""Brute-force reference implementations, written straight from the definitions.

They favour obviousness over speed: dense matrices, pairwise loops, counting
ranks instead of sorting. None of them share code with the library beyond the
data classes they read.
"""

from __future__ import annotations

import itertools

import numpy as np

from helpers import dense_normalized
from qagraph.gcn import bce_loss
from qagraph.graph import NodeKind

# --- GCN ------------------------------------------------------------------------


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def dense_forward(g, w1, w2):
    a = dense_normalized(g)
    h = np.maximum(w1 * (a @ g.features()), 0.0)
    return sigmoid(w2 * (a @ h))


def dense_loss(g, w1, w2):
    return bce_loss(dense_forward(g, w1, w2), g.labels(), g.loss_mask())


def central_difference(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


# --- GQAG edges -------------------------------------------------------------------


def _is_qa(n):
    return n.kind is not NodeKind.QQ and n.kind is not NodeKind.AA


def _q_elems(n):
    if n.kind is NodeKind.QQ:
        return [n.element_a, n.element_b]
    return [] if n.kind is NodeKind.AA else [n.element_a]


def _a_elems(n):
    if n.kind is NodeKind.AA:
        return [n.element_a, n.element_b]
    return [] if n.kind is NodeKind.QQ else [n.element_b]


def gqag_edges(nodes, qq, aa, th_qq, th_aa):
    """``qq``/``aa`` map sorted id pairs to scores; identity counts as similar."""

    def sim(table, x, y, th):
        return x == y or table.get((min(x, y), max(x, y)), 0.0) >= th

    out = set()
    for u, v in itertools.combinations(nodes, 2):
        same_q = _is_qa(u) and _is_qa(v) and u.element_a == v.element_a
        aa_hit = any(sim(aa, x, y, th_aa) for x in _a_elems(u) for y in _a_elems(v))
        qq_hit = any(sim(qq, x, y, th_qq) for x in _q_elems(u) for y in _q_elems(v))
        if same_q or aa_hit or qq_hit:
            out.add((u.id, v.id))
    return out


# --- EQAG edges -------------------------------------------------------------------


def _rank_desc(v, group, s):
    # position in a stable descending sort; ties keep node order
    return sum(1 for w in group if s[w] > s[v] or (s[w] == s[v] and w < v))


def _top(group, k, th, s):
    return {v for v in group if _rank_desc(v, group, s) < k and s[v] >= th}


def _bottom(group, k, below, s):
    pool = [v for v in group if s[v] < below]
    return {v for v in pool if sum(1 for w in pool if s[w] < s[v] or (s[w] == s[v] and w < v)) < k}


def eqag_edges(graph, qa_score, cfg):
    """Every edge an EQAG over ``graph``'s nodes should carry under ``cfg``.

    ``qa_score(question_id, answer_id)`` gives the raw QA score, so the oracle
    also works when RI has replaced the stored features.
    """
    s = {n.id: qa_score(n.element_a, n.element_b) for n in graph.nodes}
    rows: dict[str, list[int]] = {}
    for n in graph.nodes:
        rows.setdefault(n.element_a, []).append(n.id)
    q_ts = graph.test_question_id
    test = rows[q_ts]
    label = {n.id: n.label for n in graph.nodes}
    top_intra = {q: _top(ids, cfg.k_intra, cfg.th_intra, s) for q, ids in rows.items()}
    bottom_test = _bottom(test, cfg.k_intra, cfg.th_intra, s)

    def linked(t, r):
        row = rows[graph.nodes[r].element_a]
        pos = [v for v in row if label[v] == 1]
        neg = [v for v in row if label[v] == 0]
        if cfg.variant == "TA":
            return t in top_intra[q_ts] and r in _top(row, cfg.k_inter, cfg.th_inter, s)
        if label[r] == 1:
            return t in top_intra[q_ts] and r in _top(pos, cfg.k_inter, cfg.th_inter, s)
        if cfg.variant == "Tplus":
            return False
        return t in bottom_test and r in _top(neg, cfg.k_inter, cfg.th_inter, s)

    out = set()
    for u, v in itertools.combinations(range(graph.n_nodes), 2):
        qu, qv = graph.nodes[u].element_a, graph.nodes[v].element_a
        if qu == qv:
            if u in top_intra[qu] and v in top_intra[qu]:
                out.add((u, v))
        elif qu == q_ts and linked(u, v):
            out.add((u, v))
        elif qv == q_ts and linked(v, u):
            out.add((u, v))
    return out


# --- derived pairs ----------------------------------------------------------------


def _norm(text):
    return " ".join(text.split())


def qq_pairs(ds, mode):
    train = [q for q in ds.questions if q.split == "train"]
    dev = [q for q in ds.questions if q.split == "dev"]
    if mode == "cross":
        cand = [(a, b) for a in train for b in dev]
    elif mode == "within":
        cand = list(itertools.combinations(train, 2)) + list(itertools.combinations(dev, 2))
    else:
        cand = list(itertools.combinations(train + dev, 2))

    def answers(q):
        return {_norm(a.text) for a in ds.candidates if a.question_id == q.id}

    return {(a.id, b.id): int(bool(answers(a) & answers(b))) for a, b in cand}


def aa_pairs(ds, splits=("train", "dev")):
    """Positive and (uncapped) negative answer pairs as two sets."""
    qs = [q for q in ds.questions if q.split in splits]
    count: dict[str, int] = {}
    for q in qs:
        count[_norm(q.text)] = count.get(_norm(q.text), 0) + 1
    text = {q.id: _norm(q.text) for q in qs}
    answers = [(a, text[a.question_id]) for a in ds.candidates if a.question_id in text]
    pos, neg = set(), set()
    for (a, ta), (b, tb) in itertools.combinations(answers, 2):
        if a.question_id == b.question_id:
            continue
        if ta == tb:
            pos.add((a.id, b.id))
        elif count[ta] == 1 and count[tb] == 1:
            neg.add((a.id, b.id))
    return pos, neg
