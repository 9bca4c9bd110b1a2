"""Precision-at-1, unique-decision filtering, baseline back-off and metric reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from qagraph.graph import QaGraph


@dataclass(frozen=True)
class QuestionResult:
    question_id: str
    ranked: tuple[tuple[str, float, int], ...]  # (answer_id, score, label), best first
    decidable: bool
    source: str = "gnn"

    @property
    def top_answer_id(self) -> str:
        return self.ranked[0][0]

    @property
    def correct(self) -> bool:
        return self.ranked[0][2] == 1

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "top_answer_id": self.top_answer_id,
            "correct": self.correct,
            "decidable": self.decidable,
            "source": self.source,
            "ranked": [[a, s, lab] for a, s, lab in self.ranked],
        }


def make_result(
    question_id: str,
    answer_ids: Sequence[str],
    scores: Sequence[float],
    labels: Sequence[int],
    tie_eps: float = 0.0,
    source: str = "gnn",
) -> QuestionResult:
    """Rank candidates by score, breaking ties by input order.

    The result is undecidable when the runner-up is within ``tie_eps`` of the
    top score (exact equality by default).
    """
    if not answer_ids:
        raise ValueError(f"question {question_id!r} has no candidates")
    if not (len(answer_ids) == len(scores) == len(labels)):
        raise ValueError("answer_ids, scores and labels differ in length")
    order = sorted(range(len(answer_ids)), key=lambda i: -scores[i])
    ranked = tuple((answer_ids[i], float(scores[i]), int(labels[i])) for i in order)
    decidable = len(ranked) == 1 or ranked[0][1] - ranked[1][1] > tie_eps
    return QuestionResult(question_id, ranked, decidable, source)


def p_at_1(results: Iterable[QuestionResult]) -> float:
    results = list(results)
    if not results:
        raise ValueError("no questions to evaluate")
    return sum(r.correct for r in results) / len(results)


def unique_decision_filter(results: Iterable[QuestionResult]) -> list[QuestionResult]:
    return [r for r in results if r.decidable]


def backoff_combine(
    gnn_results: Mapping[str, QuestionResult | None],
    baseline: Mapping[str, QuestionResult],
) -> list[QuestionResult]:
    """Per question, keep a decidable GNN result; otherwise the baseline decides.

    Questions covered by ``baseline`` define the evaluation set; a GNN result
    for a question the baseline lacks is an error.
    """
    extra = set(gnn_results) - set(baseline)
    if extra:
        raise KeyError(f"no baseline scores for questions {sorted(extra)}")
    out = []
    for qid, base in baseline.items():
        r = gnn_results.get(qid)
        if r is not None and r.decidable:
            out.append(r)
        else:
            out.append(QuestionResult(qid, base.ranked, base.decidable, "baseline"))
    return out


def baseline_result(dataset, question_id: str, scores: Mapping[str, float]) -> QuestionResult:
    """Result ranked by per-candidate baseline scores (ties broken by dataset order)."""
    cands = dataset.candidates_of(question_id)
    missing = [a.id for a in cands if a.id not in scores]
    if missing:
        raise KeyError(f"question {question_id!r}: no baseline score for {missing}")
    return make_result(
        question_id, [a.id for a in cands], [scores[a.id] for a in cands],
        [a.label for a in cands], source="baseline",
    )


@dataclass(frozen=True)
class GraphStats:
    n_graphs: int
    edges: int
    nodes: int

    @property
    def edges_per_q(self) -> float:
        return self.edges / self.n_graphs if self.n_graphs else 0.0

    @property
    def nodes_per_q(self) -> float:
        return self.nodes / self.n_graphs if self.n_graphs else 0.0

    def to_json(self) -> dict:
        return {
            "questions": self.n_graphs,
            "edges": self.edges,
            "nodes": self.nodes,
            "edges_per_q": self.edges_per_q,
            "nodes_per_q": self.nodes_per_q,
        }


def graph_stats(graphs: Iterable[QaGraph]) -> GraphStats:
    n = e = v = 0
    for g in graphs:
        n += 1
        e += g.n_edges
        v += g.n_nodes
    return GraphStats(n, e, v)


@dataclass
class EvalReport:
    p_at_1: float | None
    n_questions: int
    n_incorrect: int
    n_considered: int
    graph: GraphStats
    variant: str | None = None
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def coverage(self) -> float:
        return self.n_considered / self.n_questions if self.n_questions else 0.0

    def to_json(self) -> dict:
        out = {
            "p_at_1": self.p_at_1,
            "n_questions": self.n_questions,
            "n_incorrect": self.n_incorrect,
            "n_considered": self.n_considered,
            "coverage": self.coverage,
            "graph": self.graph.to_json(),
            "variant": self.variant,
            "config": self.config,
        }
        out.update(self.extra)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def render_table(self) -> str:
        p = "n/a" if self.p_at_1 is None else f"{self.p_at_1:.4f}"
        g = self.graph
        rows = [
            ("P@1", p),
            ("#Q Inc.", str(self.n_incorrect)),
            ("#Q Answerable", str(self.n_considered)),
            ("#Q", str(self.n_questions)),
            ("Edges", str(g.edges)),
            ("Nodes", str(g.nodes)),
            ("Edges/Qs", f"{g.edges_per_q:.0f}"),
            ("Nodes/Qs", f"{g.nodes_per_q:.0f}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def report(
    results: Sequence[QuestionResult],
    n_questions: int,
    stats: GraphStats,
    config: Mapping | None = None,
    variant: str | None = None,
    extra: Mapping | None = None,
) -> EvalReport:
    """Aggregate considered results; ``n_questions`` counts every target question."""
    considered = list(results)
    p = p_at_1(considered) if considered else None
    wrong = sum(not r.correct for r in considered)
    return EvalReport(p, n_questions, wrong, len(considered), stats, variant,
                      dict(config or {}), dict(extra or {}))
