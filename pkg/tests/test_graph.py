import numpy as np
import pytest

from helpers import random_graph
from qagraph.graph import GraphNode, NodeKind, QaGraph, disjoint_union, prune_isolated


def _abc():
    g = QaGraph("q")
    for name in "ABC":
        g.add_node(NodeKind.QA_TEST, "q", name, 0.5)
    return g


def test_prune_drops_isolated():
    g = _abc()
    g.add_edge(0, 1)
    p = prune_isolated(g)
    assert [n.element_b for n in p.nodes] == ["A", "B"]
    assert p.edges == {(0, 1): 1.0}


def test_prune_keeps_triangle():
    g = _abc()
    g.add_edges([(0, 1), (1, 2), (0, 2)])
    p = prune_isolated(g)
    assert p.to_json() == g.to_json()


@pytest.mark.parametrize("seed", range(10))
def test_prune_equals_degree_filter(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(20, 0.08, rng)
    deg = {i: 0 for i in range(g.n_nodes)}
    for i, j in g.edges:
        deg[i] += 1
        deg[j] += 1
    survivors = [g.nodes[i].element_b for i in range(g.n_nodes) if deg[i] > 0]
    p = prune_isolated(g)
    assert [n.element_b for n in p.nodes] == survivors
    assert [n.id for n in p.nodes] == list(range(len(survivors)))
    named = {frozenset((g.nodes[i].element_b, g.nodes[j].element_b)) for i, j in g.edges}
    assert {frozenset((p.nodes[i].element_b, p.nodes[j].element_b)) for i, j in p.edges} == named
    if p.n_nodes:
        assert p.degrees().min() >= 1


def test_edge_validation():
    g = _abc()
    with pytest.raises(ValueError):
        g.add_edge(1, 1)
    with pytest.raises(IndexError):
        g.add_edge(0, 7)
    g.add_edge(2, 0)
    assert (0, 2) in g.edges


def test_node_validation():
    with pytest.raises(ValueError):
        GraphNode(0, NodeKind.QA_TEST, "q", "a", 0.5, 1, True)
    with pytest.raises(ValueError):
        GraphNode(0, NodeKind.QA_TRAIN_NEG, "q", "a", 0.5, None, True)


def test_json_round_trip(tmp_path):
    g = _abc()
    g.add_node(NodeKind.QA_TRAIN_POS, "t", "x", 0.9, 1, True)
    g.add_edges([(0, 3), (1, 2)])
    g.metadata = {"family": "eqag"}
    path = tmp_path / "g.json"
    g.dump(path)
    back = QaGraph.load(path)
    assert back.to_json() == g.to_json()
    assert back.nodes[3].kind is NodeKind.QA_TRAIN_POS


def test_disjoint_union_offsets():
    a, b = _abc(), _abc()
    a.add_edge(0, 1)
    b.add_edge(1, 2)
    u, off = disjoint_union([a, b])
    assert off == [0, 3]
    assert set(u.edges) == {(0, 1), (4, 5)}
    assert [n.id for n in u.nodes] == list(range(6))
