"""Per-question build -> train -> predict -> evaluate, and dev-set sweeps."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from qagraph.dataset import Dataset, derive_aa_pairs, derive_qq_pairs, pair_label_map
from qagraph.eqag import EqagConfig, build_eqag
from qagraph.errors import ConfigError, QaGraphError
from qagraph.evaluation import (
    EvalReport,
    GraphStats,
    QuestionResult,
    backoff_combine,
    baseline_result,
    make_result,
    p_at_1,
    report,
    unique_decision_filter,
)
from qagraph.gcn import GcnModel, TrainConfig, normalize_adjacency, predict, train
from qagraph.gqag import GqagConfig, build_gqag
from qagraph.graph import QaGraph, disjoint_union
from qagraph.scoring import Scorers

log = logging.getLogger(__name__)

GRAPH_FAMILIES = ("gqag", "eqag")
SWEEP_PARAMS = ("k_intra", "k_inter", "th_intra", "th_inter")


@dataclass(frozen=True)
class RunConfig:
    graph: str = "eqag"
    eqag: EqagConfig = EqagConfig()
    gqag: GqagConfig = GqagConfig()
    epochs: int = 500
    patience: int = 25
    lr: float = 1e-3
    dropout: float = 0.1
    seed: int = 0
    eval_split: str = "test"
    shared_model: bool = False
    tie_eps: float = 0.0
    qq_pair_mode: str = "within"
    aa_neg_ratio: float = 10.0

    def __post_init__(self) -> None:
        if self.graph not in GRAPH_FAMILIES:
            raise ConfigError(f"graph family must be one of {GRAPH_FAMILIES}")
        if self.eval_split not in ("dev", "test"):
            raise ConfigError("evaluation split must be dev or test")
        if self.tie_eps < 0:
            raise ConfigError("tie epsilon must be >= 0")

    def model(self) -> GcnModel:
        return GcnModel(dropout=self.dropout, lr=self.lr, seed=self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, patience=self.patience, lr=self.lr, seed=self.seed)

    def as_dict(self) -> dict:
        d = asdict(self)
        if self.graph == "eqag":
            d.pop("gqag")
            d.pop("qq_pair_mode")
            d.pop("aa_neg_ratio")
            d.pop("tie_eps")
        else:
            d.pop("eqag")
        return d


@dataclass
class QuestionOutcome:
    question_id: str
    graph: QaGraph | None
    result: QuestionResult | None  # None: the graph model cannot answer
    baseline: QuestionResult
    build_seconds: float = 0.0
    train_seconds: float = 0.0
    epochs: int = 0
    error: str | None = None


@dataclass
class RunContext:
    dataset: Dataset
    scorers: Scorers
    config: RunConfig
    pair_labels: Mapping[tuple[str, str], int] | None = None
    keep_graphs: bool = False

    @classmethod
    def create(cls, dataset: Dataset, scorers: Scorers, config: RunConfig, keep_graphs: bool = False):
        labels = None
        if config.graph == "gqag":
            pairs = derive_qq_pairs(dataset, mode=config.qq_pair_mode)
            pairs += derive_aa_pairs(dataset, neg_ratio=config.aa_neg_ratio, seed=config.seed)
            labels = pair_label_map(pairs)
        return cls(dataset, scorers, config, labels, keep_graphs)


def build_graph(ctx: RunContext, qid: str) -> QaGraph:
    cfg = ctx.config
    if cfg.graph == "eqag":
        return build_eqag(qid, ctx.dataset, ctx.scorers.qa, ctx.scorers.qq, replace(cfg.eqag, seed=cfg.seed))
    return build_gqag(qid, ctx.dataset, ctx.scorers, cfg.gqag, ctx.pair_labels)


def graph_answerable(graph: QaGraph) -> bool:
    if graph.metadata.get("family") == "gqag":
        return bool(graph.metadata.get("answerable"))
    return bool(graph.test_nodes()) and bool(graph.loss_mask().any())


def result_from_scores(graph: QaGraph, scores: np.ndarray, tie_eps: float = 0.0) -> QuestionResult:
    """Rank the graph's test nodes by GNN score.

    EQAG breaks ties by its row order (QA score, then input order) and is
    always decidable; GQAG keeps node order and flags ties within ``tie_eps``.
    """
    by_answer = {n.element_b: (float(scores[n.id]), n.label) for n in graph.test_nodes()}
    if graph.metadata.get("family") == "eqag":
        order = [a for a in graph.metadata["test_row_order"] if a in by_answer]
        result = make_result(graph.test_question_id, order, [by_answer[a][0] for a in order],
                             [by_answer[a][1] for a in order])
        return replace(result, decidable=True)
    order = list(by_answer)
    return make_result(graph.test_question_id, order, [by_answer[a][0] for a in order],
                       [by_answer[a][1] for a in order], tie_eps=tie_eps)


def _baseline(ctx: RunContext, qid: str) -> QuestionResult:
    scores = {a.id: ctx.scorers.qa(qid, a.id) for a in ctx.dataset.candidates_of(qid)}
    return baseline_result(ctx.dataset, qid, scores)


def run_question(ctx: RunContext, qid: str, train_model: bool = True) -> QuestionOutcome:
    t0 = time.perf_counter()
    graph = build_graph(ctx, qid)
    t1 = time.perf_counter()
    base = _baseline(ctx, qid)
    out = QuestionOutcome(qid, graph, None, base, build_seconds=t1 - t0)
    if train_model and graph_answerable(graph):
        adj = normalize_adjacency(graph)
        fit = train(ctx.config.model(), graph, ctx.config.train_config(), adj=adj)
        out.result = result_from_scores(graph, predict(fit.model, graph, adj), ctx.config.tie_eps)
        out.epochs = fit.state.epoch
    out.train_seconds = time.perf_counter() - t1
    return out


_WORKER_CTX: RunContext | None = None


def _init_worker(ctx: RunContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker(args: tuple[str, bool, bool]) -> QuestionOutcome:
    qid, train_model, skip_errors = args
    return _guarded(_WORKER_CTX, qid, train_model, skip_errors)


def _guarded(ctx: RunContext, qid: str, train_model: bool, skip_errors: bool) -> QuestionOutcome:
    try:
        out = run_question(ctx, qid, train_model)
    except Exception as exc:
        if not skip_errors:
            # keep library error classes so callers can still classify the failure
            cls = type(exc) if isinstance(exc, QaGraphError) else RuntimeError
            raise cls(f"question {qid!r}: {exc}") from exc
        log.warning("skipping question %s: %s", qid, exc)
        return QuestionOutcome(qid, None, None, _baseline(ctx, qid), error=str(exc))
    if not ctx.keep_graphs:
        out.graph = _stats_only(out.graph)
    return out


def _stats_only(graph: QaGraph) -> QaGraph:
    # keeps counts for reporting without shipping full graphs between processes
    stub = QaGraph(graph.test_question_id, metadata={"family": graph.metadata.get("family")})
    stub.metadata["n_nodes"] = graph.n_nodes
    stub.metadata["n_edges"] = graph.n_edges
    return stub


def run_questions(
    ctx: RunContext,
    question_ids: Sequence[str],
    jobs: int = 1,
    train_model: bool = True,
    skip_errors: bool = False,
) -> list[QuestionOutcome]:
    """Outcomes in ``question_ids`` order regardless of worker completion order."""
    if jobs <= 1 or len(question_ids) <= 1:
        return [_guarded(ctx, q, train_model, skip_errors) for q in question_ids]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
        outs = list(pool.map(_worker, [(q, train_model, skip_errors) for q in question_ids]))
    by_id = {o.question_id: o for o in outs}
    return [by_id[q] for q in question_ids]


def _shared_training(ctx: RunContext, outcomes: list[QuestionOutcome], jobs: int) -> None:
    """Train one model on the union of all answerable graphs and score every graph with it."""
    graphs = [o.graph for o in outcomes if o.graph is not None and graph_answerable(o.graph)]
    if not graphs:
        return
    union, offsets = disjoint_union(graphs)
    monitor = None
    if ctx.config.eval_split == "test" and ctx.dataset.questions_in("dev"):
        dev_ids = [q.id for q in ctx.dataset.questions_in("dev")]
        dev_graphs = [o.graph for o in run_questions(ctx, dev_ids, jobs, train_model=False)
                      if o.graph is not None and o.graph.test_nodes()]
        if dev_graphs:
            dev_union, dev_off = disjoint_union(dev_graphs)
            dev_adj = normalize_adjacency(dev_union)

            def monitor(model: GcnModel) -> float:
                scores = predict(model, dev_union, dev_adj)
                results = [result_from_scores(g, scores[off : off + g.n_nodes], ctx.config.tie_eps)
                           for g, off in zip(dev_graphs, dev_off)]
                if ctx.config.graph == "gqag":
                    results = unique_decision_filter(results)
                return p_at_1(results) if results else 0.0

    fit = train(ctx.config.model(), union, ctx.config.train_config(), monitor=monitor)
    scores = predict(fit.model, union)
    by_id = {g.test_question_id: (g, off) for g, off in zip(graphs, offsets)}
    for o in outcomes:
        if o.question_id in by_id:
            g, off = by_id[o.question_id]
            o.result = result_from_scores(g, scores[off : off + g.n_nodes], ctx.config.tie_eps)
            o.epochs = fit.state.epoch


def _counts(o: QuestionOutcome) -> tuple[int, int]:
    g = o.graph
    if "n_nodes" in g.metadata:
        return g.metadata["n_nodes"], g.metadata["n_edges"]
    return g.n_nodes, g.n_edges


def summarize(ctx: RunContext, outcomes: Sequence[QuestionOutcome]) -> EvalReport:
    cfg = ctx.config
    built = [o for o in outcomes if o.graph is not None]
    if cfg.graph == "gqag":
        # only graphs that kept a test node count toward graph statistics
        counted = [o for o in built if o.result is not None]
    else:
        counted = built
    counts = [_counts(o) for o in counted]
    stats = GraphStats(len(counts), sum(e for _, e in counts), sum(n for n, _ in counts))
    baseline = {o.question_id: o.baseline for o in outcomes}
    extra = {"baseline_p_at_1": p_at_1(baseline.values()), "eval_split": cfg.eval_split}
    gnn = {o.question_id: o.result for o in outcomes}
    if cfg.graph == "gqag":
        considered = unique_decision_filter(r for r in gnn.values() if r is not None)
        combined = backoff_combine(gnn, baseline)
        extra["backoff"] = {
            "p_at_1": p_at_1(combined),
            "n_incorrect": sum(not r.correct for r in combined),
            "n_from_baseline": sum(r.source == "baseline" for r in combined),
        }
        extra["n_answerable"] = sum(r is not None for r in gnn.values())
    else:
        considered = [r for r in gnn.values() if r is not None]
    extra["n_errors"] = sum(o.error is not None for o in outcomes)
    variant = cfg.eqag.variant if cfg.graph == "eqag" else None
    return report(considered, len(outcomes), stats, cfg.as_dict(), variant, extra)


def run_pipeline(
    ctx: RunContext,
    jobs: int = 1,
    skip_errors: bool = False,
) -> tuple[EvalReport, list[QuestionOutcome]]:
    qids = [q.id for q in ctx.dataset.questions_in(ctx.config.eval_split)]
    if not qids:
        raise ConfigError(f"no {ctx.config.eval_split} questions to evaluate")
    if ctx.config.shared_model:
        keep = ctx.keep_graphs
        ctx.keep_graphs = True
        outcomes = run_questions(ctx, qids, jobs, train_model=False, skip_errors=skip_errors)
        _shared_training(ctx, outcomes, jobs)
        ctx.keep_graphs = keep
    else:
        outcomes = run_questions(ctx, qids, jobs, skip_errors=skip_errors)
    return summarize(ctx, outcomes), outcomes


DEFAULT_GRID: dict[str, list] = {
    "k_intra": [1, 3, 5, 10, 20],
    "k_inter": [1, 5, 10, 20, 50],
    "th_intra": [0.5, 0.6, 0.7, 0.8, 0.9],
    "th_inter": [0.7, 0.8, 0.9, 0.95, 1.0],
}


def sweep(
    dataset: Dataset,
    scorers: Scorers,
    config: RunConfig,
    grid: Mapping[str, Sequence],
    jobs: int = 1,
) -> list[tuple[str, object, float]]:
    """One-at-a-time EQAG sweeps on the dev split around ``config``'s fixed values."""
    if config.graph != "eqag":
        raise ConfigError("sweeps tune EQAG hyperparameters; use --graph eqag")
    grid = {k: list(v) for k, v in grid.items() if len(v)}
    if not grid:
        raise ConfigError("empty sweep grid")
    unknown = set(grid) - set(SWEEP_PARAMS)
    if unknown:
        raise ConfigError(f"unknown sweep parameters {sorted(unknown)}")
    if not dataset.questions_in("dev"):
        raise ConfigError("sweeps need a non-empty dev split")
    rows = []
    for param in SWEEP_PARAMS:
        for value in grid.get(param, []):
            cfg = replace(config, eval_split="dev", eqag=replace(config.eqag, **{param: value}))
            rep, _ = run_pipeline(RunContext.create(dataset, scorers, cfg), jobs=jobs)
            rows.append((param, value, rep.p_at_1))
    return rows


def node_kind_counts(graph: QaGraph) -> dict[str, int]:
    counts: dict[str, int] = {}
    for n in graph.nodes:
        counts[n.kind.value] = counts.get(n.kind.value, 0) + 1
    return counts


__all__ = [
    "DEFAULT_GRID",
    "QuestionOutcome",
    "RunConfig",
    "RunContext",
    "build_graph",
    "run_pipeline",
    "run_question",
    "run_questions",
    "summarize",
    "sweep",
]
