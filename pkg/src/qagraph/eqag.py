"""Efficient QA Graph: QA-pair nodes in rows, with intra-row cliques and inter-row links."""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from qagraph.dataset import Dataset
from qagraph.errors import ConfigError, DatasetError
from qagraph.graph import NodeKind, QaGraph
from qagraph.scoring import Scorer, check_threshold, top_k

VARIANTS = ("RI", "TA", "Tplus", "Tpm")
TARGET_SPLITS = ("dev", "test")


@dataclass(frozen=True)
class RowEntry:
    node: int
    answer_id: str
    score: float
    label: int | None


@dataclass(frozen=True)
class Row:
    """One question with all its candidates, ordered by QA score (stable)."""

    question_id: str
    entries: tuple[RowEntry, ...]
    origin: str

    @classmethod
    def from_entries(cls, question_id: str, entries: Sequence[RowEntry], origin: str) -> "Row":
        ranked = sorted(entries, key=lambda e: -e.score)
        return cls(question_id, tuple(ranked), origin)


@dataclass(frozen=True)
class EqagConfig:
    k_rows: int = 10
    k_intra: int = 5
    k_inter: int = 10
    th_intra: float = 0.70
    th_inter: float = 0.90
    variant: str = "Tpm"
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("k_rows", "k_intra", "k_inter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        check_threshold("th_intra", self.th_intra)
        check_threshold("th_inter", self.th_inter)
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def as_dict(self) -> dict:
        return asdict(self)


def select_rows(q_ts: str, train_questions: Sequence[str], qq_scorer: Scorer, k_rows: int) -> list[str]:
    """Top ``k_rows`` training questions by QQ score, no threshold."""
    scored = [(q, qq_scorer(q_ts, q)) for q in train_questions if q != q_ts]
    if not scored:
        return []
    return [q for q, _ in top_k(scored, k_rows, threshold=-np.inf)]


def _top_entries(entries: Sequence[RowEntry], k: int, th: float) -> list[RowEntry]:
    ranked = sorted(entries, key=lambda e: -e.score)
    return [e for e in ranked[:k] if e.score >= th]


def _bottom_entries(entries: Sequence[RowEntry], k: int, below: float) -> list[RowEntry]:
    pool = [e for e in entries if e.score < below]
    pool.sort(key=lambda e: e.score)
    return pool[:k]


def intra_row_edges(row: Row, k_intra: int, th_intra: float) -> list[tuple[int, int]]:
    """Clique over the row's top ``k_intra`` nodes that also pass ``th_intra``."""
    chosen = sorted(e.node for e in _top_entries(row.entries, k_intra, th_intra))
    return [(a, b) for i, a in enumerate(chosen) for b in chosen[i + 1 :]]


def inter_row_edges(
    test_row: Row,
    train_row: Row,
    k_inter: int,
    th_inter: float,
    variant: str,
    k_intra: int,
    th_intra: float,
) -> list[tuple[int, int]]:
    """Bipartite ``(test_node, train_node)`` edges between the test row and one train row.

    Eligible train nodes (per variant) are ranked by QA score, cut to
    ``k_inter`` and thresholded by ``th_inter``. They attach to the test row's
    top ``k_intra`` nodes passing ``th_intra``. Under Tpm/RI, negative train
    nodes go instead to the ``k_intra`` lowest test nodes scoring below ``th_intra``.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    test_top = _top_entries(test_row.entries, k_intra, th_intra)
    links: list[tuple[list[RowEntry], list[RowEntry]]] = []
    if variant == "TA":
        links.append((_top_entries(train_row.entries, k_inter, th_inter), test_top))
    elif variant == "Tplus":
        pos = [e for e in train_row.entries if e.label == 1]
        links.append((_top_entries(pos, k_inter, th_inter), test_top))
    else:
        pos = [e for e in train_row.entries if e.label == 1]
        neg = [e for e in train_row.entries if e.label == 0]
        links.append((_top_entries(pos, k_inter, th_inter), test_top))
        links.append(
            (_top_entries(neg, k_inter, th_inter), _bottom_entries(test_row.entries, k_intra, th_intra))
        )
    out = {(t.node, r.node) for train_side, test_side in links for r in train_side for t in test_side}
    return sorted(out)


def _question_seed(seed: int, question_id: str) -> list[int]:
    return [seed, zlib.crc32(question_id.encode("utf-8"))]


def apply_variant_features(graph: QaGraph, variant: str, seed: int) -> QaGraph:
    """RI replaces every node feature with a seeded U[0, 1] draw; other variants are identity."""
    if variant != "RI":
        return graph
    rng = np.random.default_rng(_question_seed(seed, graph.test_question_id))
    return graph.with_features(rng.uniform(0.0, 1.0, size=graph.n_nodes))


def build_eqag(
    q_ts: str,
    dataset: Dataset,
    qa_scorer: Scorer,
    qq_scorer: Scorer,
    config: EqagConfig = EqagConfig(),
) -> QaGraph:
    """All target candidates plus every candidate of the top ``k_rows`` train rows.

    Nothing is pruned, so every target candidate gets a prediction.
    """
    if not dataset.has_question(q_ts):
        raise DatasetError(f"unknown question {q_ts!r}")
    if dataset.question(q_ts).split not in TARGET_SPLITS:
        raise DatasetError(f"EQAG target {q_ts!r} must come from dev/test")

    g = QaGraph(q_ts)
    test_entries = []
    for a in dataset.candidates_of(q_ts):
        s = qa_scorer(q_ts, a.id)
        idx = g.add_node(NodeKind.QA_TEST, q_ts, a.id, s, a.label, False)
        test_entries.append(RowEntry(idx, a.id, s, a.label))
    test_row = Row.from_entries(q_ts, test_entries, "test")

    train_ids = [q.id for q in dataset.questions_in("train")]
    row_ids = select_rows(q_ts, train_ids, qq_scorer, config.k_rows)
    rows = []
    for qid in row_ids:
        entries = []
        for a in dataset.candidates_of(qid):
            s = qa_scorer(qid, a.id)
            kind = NodeKind.QA_TRAIN_POS if a.label == 1 else NodeKind.QA_TRAIN_NEG
            idx = g.add_node(kind, qid, a.id, s, a.label, True)
            entries.append(RowEntry(idx, a.id, s, a.label))
        rows.append(Row.from_entries(qid, entries, "train"))

    g.add_edges(intra_row_edges(test_row, config.k_intra, config.th_intra))
    for row in rows:
        g.add_edges(intra_row_edges(row, config.k_intra, config.th_intra))
        g.add_edges(
            inter_row_edges(
                test_row, row, config.k_inter, config.th_inter, config.variant,
                config.k_intra, config.th_intra,
            )
        )

    g = apply_variant_features(g, config.variant, config.seed)
    g.metadata = {
        "family": "eqag",
        "variant": config.variant,
        "config": config.as_dict(),
        "rows": row_ids,
        # candidate order used to break score ties at evaluation time
        "test_row_order": [e.answer_id for e in test_row.entries],
    }
    return g
