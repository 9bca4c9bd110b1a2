"""Normalized adjacency, GCN layers, BCE training with Adam, prediction and checkpoints."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

import qagraph.gcn as _pkg
from qagraph.graph import QaGraph

BCE_EPS = 1e-7
ACTIVATIONS = ("relu", "sigmoid", "none")


@dataclass(frozen=True)
class NormalizedAdjacency:
    """CSR rows of ``D^-1/2 (A + I) D^-1/2`` with ``d_i = 1 + sum_j e_ji``.

    Column indices within a row are sorted and include the self loop.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def neighbors(self, i: int) -> dict[int, float]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return dict(zip(self.indices[lo:hi].tolist(), self.data[lo:hi].tolist()))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out


def normalize_adjacency(graph: QaGraph) -> NormalizedAdjacency:
    n = graph.n_nodes
    rows: list[dict[int, float]] = [{i: 1.0} for i in range(n)]
    for (i, j), w in graph.edges.items():
        rows[i][j] = rows[i].get(j, 0.0) + w
        rows[j][i] = rows[j].get(i, 0.0) + w
    deg = np.array([sum(r.values()) for r in rows], dtype=np.float64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices, data = [], []
    for i, r in enumerate(rows):
        cols = sorted(r)
        indices.extend(cols)
        data.extend(r[j] / math.sqrt(deg[i] * deg[j]) for j in cols)
        indptr[i + 1] = len(indices)
    return NormalizedAdjacency(
        indptr, np.asarray(indices, dtype=np.int64), np.asarray(data, dtype=np.float64), deg
    )


def _activate(x: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(x, 0.0)
    if activation == "sigmoid":
        return _pkg._kernels_py._sigmoid(x)
    if activation == "none":
        return x
    raise ValueError(f"activation must be one of {ACTIVATIONS}")


def gcn_layer(features, adj: NormalizedAdjacency, W, activation: str = "none") -> np.ndarray:
    """``act(W^T sum_j c_ji h_j)`` for (n,) or (n, d) features and a scalar or (d, d') weight."""
    h = np.asarray(features, dtype=np.float64)
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    squeeze = h.ndim == 1
    if squeeze:
        h = h[:, None]
    if h.shape[0] != adj.n:
        raise ValueError(f"{h.shape[0]} feature rows for {adj.n} nodes")
    if h.shape[1] != W.shape[0]:
        raise ValueError(f"feature dimension {h.shape[1]} does not match weight {W.shape}")
    agg = np.stack(
        [_pkg.kernels.propagate(adj.indptr, adj.indices, adj.data, np.ascontiguousarray(h[:, c]))
         for c in range(h.shape[1])],
        axis=1,
    )
    out = _activate(agg @ W, activation)
    return out[:, 0] if squeeze and out.shape[1] == 1 else out


@dataclass
class GcnModel:
    """Two scalar layer weights (feature size 1)."""

    w1: float = 1.0
    w2: float = 1.0
    dropout: float = 0.1
    lr: float = 1e-3
    seed: int = 0
    dim: int = 1

    def __post_init__(self) -> None:
        if self.dim != 1:
            raise ValueError("only feature size 1 is supported")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if not (math.isfinite(self.w1) and math.isfinite(self.w2)):
            raise ValueError("weights must be finite")

    @property
    def weights(self) -> tuple[float, float]:
        return (self.w1, self.w2)


def _keep_mask(n: int, p: float, rng: np.random.Generator | None) -> np.ndarray:
    if p == 0.0 or rng is None:
        return np.ones(n)
    return (rng.random(n) >= p) / (1.0 - p)


def forward(
    model: GcnModel,
    graph: QaGraph,
    adj: NormalizedAdjacency | None = None,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Layer 1 + ReLU (+ inverted dropout in train mode), layer 2 + sigmoid."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    adj = adj or normalize_adjacency(graph)
    k = _pkg.kernels
    z1 = k.propagate(adj.indptr, adj.indices, adj.data, graph.features())
    if mode == "train":
        rng = rng or np.random.default_rng(model.seed)
        keep = _keep_mask(adj.n, model.dropout, rng)
    else:
        keep = np.ones(adj.n)
    return k.forward(adj.indptr, adj.indices, adj.data, z1, keep, model.w1, model.w2)


def bce_loss(y_hat, y, mask) -> float:
    """Mean binary cross-entropy over masked nodes, with ``y_hat`` clamped to [1e-7, 1-1e-7]."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty loss mask")
    p = np.clip(y_hat[mask], BCE_EPS, 1.0 - BCE_EPS)
    t = y[mask]
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def gradients(
    model: GcnModel,
    graph: QaGraph,
    adj: NormalizedAdjacency | None = None,
    mask=None,
) -> tuple[float, float]:
    """Exact gradient of the masked BCE w.r.t. ``(w1, w2)``, dropout off."""
    adj = adj or normalize_adjacency(graph)
    mask = graph.loss_mask() if mask is None else np.asarray(mask, dtype=bool)
    k = _pkg.kernels
    z1 = k.propagate(adj.indptr, adj.indices, adj.data, graph.features())
    _, g1, g2 = k.loss_and_grad(
        adj.indptr, adj.indices, adj.data, z1, graph.labels(), mask.astype(np.uint8),
        np.ones(adj.n), model.w1, model.w2, BCE_EPS,
    )
    return g1, g2


@dataclass
class TrainConfig:
    epochs: int = 500
    patience: int = 25
    lr: float | None = None  # None: use the model's
    seed: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.patience < 1:
            raise ValueError("epochs must be >= 0 and patience >= 1")
        if self.lr is not None and self.lr < 0:
            raise ValueError("learning rate must be non-negative")


@dataclass
class TrainState:
    m: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    epoch: int = 0
    best_metric: float = -math.inf
    best_epoch: int = 0
    rng: np.random.Generator | None = None


@dataclass
class TrainResult:
    model: GcnModel
    history: list[dict]
    state: TrainState


def graph_seed(seed: int, name: str) -> list[int]:
    return [seed, zlib.crc32(name.encode("utf-8"))]


def train(
    model: GcnModel,
    graph: QaGraph,
    config: TrainConfig = TrainConfig(),
    adj: NormalizedAdjacency | None = None,
    monitor: Callable[[GcnModel], float] | None = None,
) -> TrainResult:
    """Full-graph Adam on the masked BCE with early stopping.

    ``monitor`` (higher is better, e.g. dev P@1) drives early stopping when
    given; otherwise the dropout-free training loss does. The best weights
    seen are returned.
    """
    mask = graph.loss_mask()
    if not mask.any():
        raise ValueError(f"graph {graph.test_question_id!r} has no in-loss nodes")
    lr = model.lr if config.lr is None else config.lr
    seed = model.seed if config.seed is None else config.seed
    adj = adj or normalize_adjacency(graph)
    k = _pkg.kernels
    ip, ix, dat = adj.indptr, adj.indices, adj.data
    z1 = k.propagate(ip, ix, dat, graph.features())
    y = graph.labels()
    mask8 = mask.astype(np.uint8)
    ones = np.ones(adj.n)

    state = TrainState(rng=np.random.default_rng(graph_seed(seed, graph.test_question_id)))
    w = np.array([model.w1, model.w2], dtype=np.float64)

    def score(wv: np.ndarray) -> tuple[float, float]:
        loss = k.loss_and_grad(ip, ix, dat, z1, y, mask8, ones, wv[0], wv[1], BCE_EPS)[0]
        if monitor is None:
            return -loss, loss
        return monitor(replace(model, w1=float(wv[0]), w2=float(wv[1]))), loss

    best_w = w.copy()
    state.best_metric, loss0 = score(w)
    history = [{"epoch": 0, "loss": loss0, "metric": state.best_metric}]
    bad = 0
    b1, b2 = config.beta1, config.beta2
    for epoch in range(1, config.epochs + 1):
        keep = _keep_mask(adj.n, model.dropout, state.rng)
        _, g1, g2 = k.loss_and_grad(ip, ix, dat, z1, y, mask8, keep, w[0], w[1], BCE_EPS)
        g = np.array([g1, g2])
        state.m = b1 * state.m + (1 - b1) * g
        state.v = b2 * state.v + (1 - b2) * g * g
        m_hat = state.m / (1 - b1**epoch)
        v_hat = state.v / (1 - b2**epoch)
        w = w - lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        state.epoch = epoch
        metric, loss = score(w)
        history.append({"epoch": epoch, "loss": loss, "metric": metric})
        if metric > state.best_metric:
            state.best_metric, state.best_epoch, best_w, bad = metric, epoch, w.copy(), 0
        else:
            bad += 1
            if bad >= config.patience:
                break
    trained = replace(model, w1=float(best_w[0]), w2=float(best_w[1]), lr=lr, seed=seed)
    return TrainResult(trained, history, state)


def predict(model: GcnModel, graph: QaGraph, adj: NormalizedAdjacency | None = None) -> np.ndarray:
    """Eval-mode scores indexed by node id."""
    return forward(model, graph, adj, mode="eval")


@dataclass(frozen=True)
class ParameterCount:
    learned: int  # entries of the two layer weights
    with_node_features: int  # d*d + n*d


def parameter_count(model: GcnModel, n_nodes: int) -> ParameterCount:
    d = model.dim
    return ParameterCount(learned=2 * d * d, with_node_features=d * d + n_nodes * d)


def save_checkpoint(result: TrainResult | GcnModel, path: str | Path, history: Sequence[dict] = ()) -> None:
    if isinstance(result, TrainResult):
        model, history, epoch = result.model, result.history, result.state.best_epoch
    else:
        model, epoch = result, 0
    payload = {
        "w1": model.w1,
        "w2": model.w2,
        "dropout": model.dropout,
        "lr": model.lr,
        "seed": model.seed,
        "epoch": epoch,
        "history": list(history),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> GcnModel:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return GcnModel(w1=float(d["w1"]), w2=float(d["w2"]), dropout=float(d["dropout"]),
                    lr=float(d["lr"]), seed=int(d["seed"]))
