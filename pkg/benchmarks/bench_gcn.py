"""Compare the compiled and numpy GCN kernels.

Times one fused forward/backward pass (``loss_and_grad``) on random graphs of
growing size, then a full training run on planted EQAG graphs with each
backend swapped in. Prints a small table; ``--json`` writes the raw numbers.

    python benchmarks/bench_gcn.py --sizes 50 500 5000 --repeat 20
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

import qagraph.gcn as gcn
from qagraph.eqag import EqagConfig, build_eqag
from qagraph.gcn import GcnModel, TrainConfig, normalize_adjacency, train
from qagraph.gcn import _kernels_py
from qagraph.graph import NodeKind, QaGraph
from qagraph.scoring import Scorers
from qagraph.synthetic import make_planted_dataset

try:
    from qagraph.gcn import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def random_graph(n: int, avg_degree: float, rng: np.random.Generator) -> QaGraph:
    g = QaGraph("bench")
    for i in range(n):
        lab = int(rng.integers(0, 2))
        kind = NodeKind.QA_TRAIN_POS if lab else NodeKind.QA_TRAIN_NEG
        g.add_node(kind, "q", f"a{i}", float(rng.random()), lab, bool(rng.random() < 0.8))
    m = int(n * avg_degree / 2)
    src, dst = rng.integers(0, n, size=(2, m))
    g.add_edges((int(a), int(b)) for a, b in zip(src, dst) if a != b)
    return g


def time_kernel(mod, graph: QaGraph, repeat: int) -> float:
    adj = normalize_adjacency(graph)
    z1 = mod.propagate(adj.indptr, adj.indices, adj.data, graph.features())
    y = graph.labels().astype(np.float64)
    mask = graph.loss_mask().astype(np.uint8)
    keep = np.ones(graph.n_nodes)

    def step():
        mod.loss_and_grad(adj.indptr, adj.indices, adj.data, z1, y, mask, keep, 1.0, 1.0, 1e-7)

    step()
    return min(timeit.repeat(step, number=1, repeat=repeat))


def time_training(mod, graphs, epochs: int) -> float:
    saved = gcn.kernels
    gcn.kernels = mod
    try:
        t0 = timeit.default_timer()
        for g in graphs:
            train(GcnModel(seed=0), g, TrainConfig(epochs=epochs, patience=epochs))
        return timeit.default_timer() - t0
    finally:
        gcn.kernels = saved


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[50, 500, 5000, 50000])
    p.add_argument("--avg-degree", type=float, default=10.0)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--json", help="write raw timings here")
    args = p.parse_args(argv)

    backends = {"numpy": _kernels_py}
    if _kernels_c is not None:
        backends["cython"] = _kernels_c
    else:
        print("compiled kernels not built; timing numpy only", file=sys.stderr)

    rng = np.random.default_rng(0)
    results = {"kernel": [], "training": {}}
    print(f"{'nodes':>8} " + " ".join(f"{name + ' us':>12}" for name in backends) + "  speedup")
    for n in args.sizes:
        g = random_graph(n, args.avg_degree, rng)
        row = {name: time_kernel(mod, g, args.repeat) for name, mod in backends.items()}
        results["kernel"].append({"nodes": n, **row})
        speed = f"{row['numpy'] / row['cython']:7.1f}x" if "cython" in row else ""
        print(f"{n:8d} " + " ".join(f"{row[k] * 1e6:12.1f}" for k in backends) + f"  {speed}")

    ds = make_planted_dataset(seed=0)
    sc = Scorers.lexical(ds)
    graphs = [build_eqag(q.id, ds, sc.qa, sc.qq, EqagConfig()) for q in ds.questions_in("test")]
    print(f"\ntraining {len(graphs)} planted EQAG graphs for {args.epochs} epochs each")
    for name, mod in backends.items():
        secs = time_training(mod, graphs, args.epochs)
        results["training"][name] = secs
        print(f"  {name:8s} {secs:7.3f} s")

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
