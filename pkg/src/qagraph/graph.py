"""Per-question QA graph: pair nodes with scalar features and weighted undirected edges."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class NodeKind(str, Enum):
    QQ = "QQ"
    AA = "AA"
    QA_TRAIN_POS = "QA_train_pos"
    QA_TRAIN_NEG = "QA_train_neg"
    QA_TEST = "QA_test"
    QA_EXACT_MATCH = "QA_exact_match"

    @property
    def is_qa(self) -> bool:
        return self.value.startswith("QA")


@dataclass(frozen=True)
class GraphNode:
    id: int
    kind: NodeKind
    element_a: str
    element_b: str
    feature: float
    label: int | None = None
    in_loss: bool = False

    def __post_init__(self) -> None:
        if self.in_loss and self.label is None:
            raise ValueError(f"node {self.id}: in_loss requires a label")
        if self.kind is NodeKind.QA_TEST and self.in_loss:
            raise ValueError(f"node {self.id}: test nodes never enter the loss")

    @property
    def question_elements(self) -> tuple[str, ...]:
        if self.kind is NodeKind.QQ:
            return (self.element_a, self.element_b)
        if self.kind.is_qa:
            return (self.element_a,)
        return ()

    @property
    def answer_elements(self) -> tuple[str, ...]:
        if self.kind is NodeKind.AA:
            return (self.element_a, self.element_b)
        if self.kind.is_qa:
            return (self.element_b,)
        return ()

    def to_json(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GraphNode":
        return cls(
            id=int(d["id"]),
            kind=NodeKind(d["kind"]),
            element_a=d["element_a"],
            element_b=d["element_b"],
            feature=float(d["feature"]),
            label=None if d.get("label") is None else int(d["label"]),
            in_loss=bool(d.get("in_loss", False)),
        )


@dataclass
class QaGraph:
    """Nodes indexed ``0..n-1`` and unordered edges stored as ``(i, j) -> weight`` with ``i < j``."""

    test_question_id: str
    nodes: list[GraphNode] = field(default_factory=list)
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def add_node(self, kind: NodeKind, a: str, b: str, feature: float, label=None, in_loss=False) -> int:
        idx = len(self.nodes)
        self.nodes.append(GraphNode(idx, kind, a, b, float(feature), label, in_loss))
        return idx

    def add_edge(self, i: int, j: int, weight: float = 1.0) -> None:
        if i == j:
            raise ValueError(f"self-edge on node {i}")
        n = len(self.nodes)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge ({i}, {j}) out of range for {n} nodes")
        key = (i, j) if i < j else (j, i)
        self.edges[key] = float(weight)

    def add_edges(self, pairs: Iterable[tuple[int, int]], weight: float = 1.0) -> None:
        for i, j in pairs:
            self.add_edge(i, j, weight)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.nodes), dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def features(self) -> np.ndarray:
        return np.array([n.feature for n in self.nodes], dtype=np.float64)

    def labels(self) -> np.ndarray:
        return np.array([0.0 if n.label is None else float(n.label) for n in self.nodes])

    def loss_mask(self) -> np.ndarray:
        return np.array([n.in_loss for n in self.nodes], dtype=bool)

    def test_nodes(self) -> list[GraphNode]:
        return [n for n in self.nodes if n.kind is NodeKind.QA_TEST]

    def sorted_edges(self) -> list[tuple[int, int, float]]:
        return [(i, j, w) for (i, j), w in sorted(self.edges.items())]

    def with_features(self, values: Sequence[float]) -> "QaGraph":
        if len(values) != len(self.nodes):
            raise ValueError("feature vector length does not match node count")
        nodes = [replace(n, feature=float(v)) for n, v in zip(self.nodes, values)]
        return QaGraph(self.test_question_id, nodes, dict(self.edges), dict(self.metadata))

    def to_json(self) -> dict:
        out = {
            "test_question_id": self.test_question_id,
            "nodes": [n.to_json() for n in self.nodes],
            "edges": [[i, j, w] for i, j, w in self.sorted_edges()],
        }
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_json(cls, d: dict) -> "QaGraph":
        g = cls(d["test_question_id"], [GraphNode.from_json(n) for n in d["nodes"]])
        for k, n in enumerate(g.nodes):
            if n.id != k:
                raise ValueError("node ids must be dense and ordered")
        for i, j, w in d["edges"]:
            g.add_edge(int(i), int(j), float(w))
        g.metadata = dict(d.get("metadata", {}))
        return g

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "QaGraph":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def prune_isolated(graph: QaGraph) -> QaGraph:
    """Drop degree-0 nodes and reindex the rest densely, preserving order."""
    deg = graph.degrees()
    keep = [n for n in graph.nodes if deg[n.id] > 0]
    remap = {n.id: k for k, n in enumerate(keep)}
    nodes = [replace(n, id=remap[n.id]) for n in keep]
    edges = {}
    for (i, j), w in graph.edges.items():
        a, b = remap[i], remap[j]
        edges[(a, b) if a < b else (b, a)] = w
    return QaGraph(graph.test_question_id, nodes, edges, dict(graph.metadata))


def disjoint_union(graphs: Sequence[QaGraph], name: str = "union") -> tuple[QaGraph, list[int]]:
    """Concatenate graphs without cross edges; returns the union and each graph's node offset."""
    out = QaGraph(name)
    offsets = []
    for g in graphs:
        off = len(out.nodes)
        offsets.append(off)
        out.nodes.extend(replace(n, id=n.id + off) for n in g.nodes)
        for (i, j), w in g.edges.items():
            out.edges[(i + off, j + off)] = w
    return out, offsets
