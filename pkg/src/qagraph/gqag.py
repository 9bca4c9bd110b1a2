"""General QA Graph: QQ, AA and QA pair nodes joined by similarity conditions."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

from qagraph.dataset import Dataset
from qagraph.errors import ConfigError, DatasetError
from qagraph.graph import GraphNode, NodeKind, QaGraph, prune_isolated
from qagraph.scoring import Scorer, Scorers, check_threshold

TARGET_SPLITS = ("dev", "test")


@dataclass(frozen=True)
class GqagConfig:
    th: float = 0.8
    tau: int = 300
    qa_cap: int = 2000
    neg_count: int = 2000
    edge_th_qq: float | None = None  # defaults to th
    edge_th_aa: float | None = None

    def __post_init__(self) -> None:
        check_threshold("th", self.th)
        for name in ("edge_th_qq", "edge_th_aa"):
            v = getattr(self, name)
            if v is not None:
                check_threshold(name, v)
        for name in ("tau", "qa_cap", "neg_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def th_qq(self) -> float:
        return self.th if self.edge_th_qq is None else self.edge_th_qq

    @property
    def th_aa(self) -> float:
        return self.th if self.edge_th_aa is None else self.edge_th_aa

    def as_dict(self) -> dict:
        return asdict(self)


def select_similar_pairs(
    anchor_items: Sequence[str],
    pool_items: Sequence[str],
    scorer: Scorer,
    th: float,
    tau: int,
) -> list[tuple[str, str, float]]:
    """Two-stage similarity expansion.

    Stage 1 keeps pool items scoring ``>= th`` against any anchor. Stage 2
    pairs each kept item with the rest of the pool and keeps pairs ``>= th``.
    The ``tau`` highest-scoring stage-2 pairs are returned (stable order).
    """
    anchors = set(anchor_items)
    selected: list[str] = []
    seen: set[str] = set()
    for anchor in anchor_items:
        for p in pool_items:
            if p in seen or p in anchors:
                continue
            if scorer(anchor, p) >= th:
                seen.add(p)
                selected.append(p)

    pairs: list[tuple[str, str, float]] = []
    done: set[tuple[str, str]] = set()
    for p in selected:
        for p2 in pool_items:
            if p2 == p:
                continue
            key = (p, p2) if p <= p2 else (p2, p)
            if key in done:
                continue
            s = scorer(p, p2)
            if s >= th:
                done.add(key)
                pairs.append((p, p2, s))
    pairs.sort(key=lambda t: -t[2])
    return pairs[:tau]


def _pair_label(labels: Mapping[tuple[str, str], int] | None, a: str, b: str) -> int | None:
    if not labels:
        return None
    return labels.get((a, b) if a <= b else (b, a))


def build_gqag_nodes(
    q_ts: str,
    dataset: Dataset,
    scorers: Scorers,
    config: GqagConfig,
    pair_labels: Mapping[tuple[str, str], int] | None = None,
) -> QaGraph:
    """Emit the five GQAG node families for one target question (no edges yet).

    ``pair_labels`` maps sorted id pairs to derived QQ/AA labels; nodes found
    there enter the loss, the rest stay unlabeled.
    """
    if not dataset.has_question(q_ts):
        raise DatasetError(f"unknown question {q_ts!r}")
    target = dataset.question(q_ts)
    if target.split not in TARGET_SPLITS:
        raise DatasetError(f"GQAG target {q_ts!r} must come from dev/test, not {target.split!r}")
    if scorers.aa is None:
        raise ConfigError("GQAG needs an AA scorer")

    train_qs = [q.id for q in dataset.questions_in("train")]
    train_answers = [a.id for q in train_qs for a in dataset.candidates_of(q)]
    test_cands = dataset.candidates_of(q_ts)
    g = QaGraph(q_ts, metadata={"family": "gqag"})

    qq_pairs = select_similar_pairs([q_ts], train_qs, scorers.qq, config.th, config.tau)
    similar_qs: list[str] = []
    for a, b, s in qq_pairs:
        lab = _pair_label(pair_labels, a, b)
        g.add_node(NodeKind.QQ, a, b, s, lab, lab is not None)
        for q in (a, b):
            if q not in similar_qs:
                similar_qs.append(q)

    positives = [a for q in similar_qs for a in dataset.candidates_of(q) if a.label == 1]
    for a in positives[: config.qa_cap]:
        g.add_node(NodeKind.QA_EXACT_MATCH, a.question_id, a.id, scorers.qa(a.question_id, a.id), 1, True)

    aa_pairs = select_similar_pairs([a.id for a in test_cands], train_answers, scorers.aa, config.th, config.tau)
    for a, b, s in aa_pairs:
        lab = _pair_label(pair_labels, a, b)
        g.add_node(NodeKind.AA, a, b, s, lab, lab is not None)

    negatives = [a for q in similar_qs for a in dataset.candidates_of(q) if a.label == 0]
    for a in negatives[: config.neg_count]:
        g.add_node(NodeKind.QA_TRAIN_NEG, a.question_id, a.id, scorers.qa(a.question_id, a.id), 0, True)

    for a in test_cands:
        g.add_node(NodeKind.QA_TEST, q_ts, a.id, scorers.qa(q_ts, a.id), a.label, False)
    return g


def _similar_groups(
    nodes: Sequence[GraphNode], elements_of, scorer: Scorer, th: float
) -> list[tuple[list[int], list[int]]]:
    """Pairs of node-index groups whose elements are similar (including identical)."""
    holders: dict[str, list[int]] = defaultdict(list)
    for n in nodes:
        for e in set(elements_of(n)):
            holders[e].append(n.id)
    elems = list(holders)
    out = [(holders[e], holders[e]) for e in elems]
    for i, j, _ in scorer.pairs_at_least(elems, th):
        out.append((holders[elems[i]], holders[elems[j]]))
    return out


def form_edges(
    nodes: Sequence[GraphNode],
    scorers: Scorers,
    th_qq: float,
    th_aa: float | None = None,
) -> set[tuple[int, int]]:
    """Undirected edges where any of the three linking conditions holds.

    (i) both nodes hold QA pairs of the same question; (ii) an answer element
    of one is AA-similar (``>= th_aa``) to an answer element of the other;
    (iii) likewise for question elements under QQ (``>= th_qq``). An element
    is always similar to itself.
    """
    th_aa = th_qq if th_aa is None else th_aa
    edges: set[tuple[int, int]] = set()

    def connect(left: list[int], right: list[int]) -> None:
        for i in left:
            for j in right:
                if i != j:
                    edges.add((i, j) if i < j else (j, i))

    by_question: dict[str, list[int]] = defaultdict(list)
    for n in nodes:
        if n.kind.is_qa:
            by_question[n.element_a].append(n.id)
    for members in by_question.values():
        connect(members, members)

    for left, right in _similar_groups(nodes, lambda n: n.answer_elements, scorers.aa, th_aa):
        connect(left, right)
    for left, right in _similar_groups(nodes, lambda n: n.question_elements, scorers.qq, th_qq):
        connect(left, right)
    return edges


def build_gqag(
    q_ts: str,
    dataset: Dataset,
    scorers: Scorers,
    config: GqagConfig = GqagConfig(),
    pair_labels: Mapping[tuple[str, str], int] | None = None,
) -> QaGraph:
    """Nodes, then edges, then isolated-node pruning.

    ``metadata["answerable"]`` is false when no test candidate survives
    pruning or no node is left for the loss; such questions need back-off.
    """
    g = build_gqag_nodes(q_ts, dataset, scorers, config, pair_labels)
    g.add_edges(sorted(form_edges(g.nodes, scorers, config.th_qq, config.th_aa)))
    n_before = g.n_nodes
    g = prune_isolated(g)
    kept = [n.element_b for n in g.test_nodes()]
    g.metadata.update(
        {
            "config": config.as_dict(),
            "n_nodes_before_pruning": n_before,
            "kept_test_candidates": kept,
            "answerable": bool(kept) and bool(g.loss_mask().any()),
        }
    )
    return g
