"""Command-line entry point: ``qagraph <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from qagraph.dataset import (
    dataset_stats,
    derive_aa_pairs,
    derive_qq_pairs,
    load_dataset,
    stats_table,
    write_pairs_tsv,
)
from qagraph.eqag import VARIANTS, EqagConfig
from qagraph.errors import ConfigError, DatasetError, MissingScoreError
from qagraph.evaluation import graph_stats, report
from qagraph.gcn import GcnModel, TrainConfig, load_checkpoint, predict, save_checkpoint, train
from qagraph.gqag import GqagConfig
from qagraph.graph import QaGraph, disjoint_union
from qagraph.pipeline import (
    DEFAULT_GRID,
    RunConfig,
    RunContext,
    build_graph,
    result_from_scores,
    run_pipeline,
    sweep,
)
from qagraph.scoring import ScoreTable, Scorer, Scorers, load_score_table

log = logging.getLogger("qagraph")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# argument groups


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="JSONL or TSV dataset file")
    p.add_argument("--format", choices=("jsonl", "tsv"), help="default: from the file suffix")
    p.add_argument("--no-filter", action="store_true",
                   help="keep questions failing the answerability filter")


def _add_scorers(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scores")
    for rel in ("qq", "qa", "aa"):
        g.add_argument(f"--scores-{rel}", metavar="TSV", help=f"{rel.upper()} score table")
    g.add_argument("--scorer", choices=("table", "lexical"), default="table",
                   help="source for relations without a score table")
    g.add_argument("--missing", choices=("error", "zero"),
                   help="absent table pairs (default: error for gqag, zero for eqag)")


def _add_graph(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("graph")
    g.add_argument("--graph", choices=("eqag", "gqag"), default="eqag")
    g.add_argument("--variant", choices=VARIANTS, default="Tpm")
    g.add_argument("--k-rows", type=int, default=10)
    g.add_argument("--k-intra", type=int, default=5)
    g.add_argument("--k-inter", type=int, default=10)
    g.add_argument("--th-intra", type=float, default=0.70)
    g.add_argument("--th-inter", type=float, default=0.90)
    g.add_argument("--th", type=float, default=0.8, help="GQAG node/edge threshold")
    g.add_argument("--edge-th", type=float, help="GQAG edge threshold (default: --th)")
    g.add_argument("--tau", type=int, default=300)
    g.add_argument("--qa-cap", type=int, default=2000)
    g.add_argument("--neg-count", type=int, default=2000)
    g.add_argument("--qq-mode", choices=("cross", "within", "all"), default="within",
                   help="QQ label derivation for GQAG node labels")
    g.add_argument("--tie-eps", type=float, default=0.0)


def _add_training(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--epochs", type=int, default=500)
    g.add_argument("--patience", type=int, default=25)
    g.add_argument("--dropout", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)


def _add_exec(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--shared-model", action="store_true",
                   help="train one model over all target graphs")
    p.add_argument("--eval-split", choices=("dev", "test"), default="test")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qagraph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="per-split question/answer counts")
    _add_dataset(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("derive-pairs", help="write derived QQ/AA pair labels")
    _add_dataset(p)
    p.add_argument("--qq-mode", choices=("cross", "within", "all"), default="cross")
    p.add_argument("--aa-neg-ratio", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-graph", help="build graphs and write them as JSON")
    _add_dataset(p)
    _add_scorers(p)
    _add_graph(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--question", action="append", help="target question id (repeatable)")
    p.add_argument("--eval-split", choices=("dev", "test"), default="test")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a GCN on graph file(s)")
    p.add_argument("--graph-file", action="append", required=True)
    _add_training(p)
    p.add_argument("--out", required=True, help="checkpoint JSON")

    p = sub.add_parser("evaluate", help="score graph file(s) with a checkpoint")
    p.add_argument("--graph-file", action="append", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tie-eps", type=float, default=0.0)
    p.add_argument("--out", help="metrics JSON (default: stdout)")

    p = sub.add_parser("run", help="build, train, predict and evaluate per target question")
    _add_dataset(p)
    _add_scorers(p)
    _add_graph(p)
    _add_training(p)
    _add_exec(p)
    p.add_argument("--save-graphs", action="store_true")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("sweep", help="one-at-a-time EQAG hyperparameter sweep on dev")
    _add_dataset(p)
    _add_scorers(p)
    _add_graph(p)
    _add_training(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--grid", action="append", metavar="PARAM=V1,V2,...",
                   help="sweep values; repeat per parameter (default: built-in grid)")
    p.add_argument("--out", required=True, help="CSV path")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _load(args):
    return load_dataset(args.dataset, args.format, filter_answerable=not args.no_filter)


def make_scorers(args, dataset, family: str) -> tuple[Scorers, dict]:
    """Scorers per relation: a table when given, else lexical when allowed."""
    missing = args.missing or ("error" if family == "gqag" else "zero")
    needed = ("qq", "qa", "aa") if family == "gqag" else ("qq", "qa")
    for rel in ("qq", "qa", "aa"):
        path = getattr(args, f"scores_{rel}")
        if path and not Path(path).is_file():
            raise ConfigError(f"--scores-{rel}: file not found: {path}")
    built: dict[str, Scorer] = {}
    sources: dict[str, str] = {}
    for rel in needed:
        path = getattr(args, f"scores_{rel}")
        kind = rel.upper()
        if path:
            table: ScoreTable = load_score_table(path, kind)
            built[rel] = Scorer(kind, table=table, missing=missing)
            sources[rel] = str(path)
        elif args.scorer == "lexical":
            built[rel] = Scorer.lexical(kind, dataset, missing=missing)
            sources[rel] = "lexical"
        else:
            raise ConfigError(f"--scores-{rel} is required (or pass --scorer lexical)")
    return Scorers(qq=built["qq"], qa=built["qa"], aa=built.get("aa")), sources


def make_run_config(args) -> RunConfig:
    eq = EqagConfig(
        k_rows=args.k_rows, k_intra=args.k_intra, k_inter=args.k_inter,
        th_intra=args.th_intra, th_inter=args.th_inter, variant=args.variant,
        seed=getattr(args, "seed", 0),
    )
    gq = GqagConfig(th=args.th, tau=args.tau, qa_cap=args.qa_cap, neg_count=args.neg_count,
                    edge_th_qq=args.edge_th, edge_th_aa=args.edge_th)
    return RunConfig(
        graph=args.graph, eqag=eq, gqag=gq,
        epochs=getattr(args, "epochs", 500), patience=getattr(args, "patience", 25),
        lr=getattr(args, "lr", 1e-3), dropout=getattr(args, "dropout", 0.1),
        seed=getattr(args, "seed", 0), eval_split=getattr(args, "eval_split", "test"),
        shared_model=getattr(args, "shared_model", False), tie_eps=args.tie_eps,
        qq_pair_mode=args.qq_mode,
    )


def parse_grid(items: list[str] | None) -> dict[str, list]:
    if not items:
        return {k: list(v) for k, v in DEFAULT_GRID.items()}
    grid: dict[str, list] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--grid expects PARAM=V1,V2,... got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip().replace("-", "_")
        if key not in DEFAULT_GRID:
            raise ConfigError(f"--grid: unknown parameter {key!r}")
        cast = int if key.startswith("k_") else float
        try:
            grid[key] = [cast(v) for v in raw.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--grid: bad value list {raw!r}") from None
    if not any(grid.values()):
        raise ConfigError("--grid: empty sweep grid")
    return grid


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_stats(args) -> int:
    ds = _load(args)
    stats = dataset_stats(ds)
    if args.json:
        print(json.dumps({k: v.as_dict() for k, v in stats.items()}, sort_keys=True))
    else:
        print(stats_table(stats))
    return EXIT_OK


def cmd_derive_pairs(args) -> int:
    ds = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_qq = write_pairs_tsv(derive_qq_pairs(ds, mode=args.qq_mode), out / "qq_pairs.tsv")
    n_aa = write_pairs_tsv(derive_aa_pairs(ds, neg_ratio=args.aa_neg_ratio, seed=args.seed),
                           out / "aa_pairs.tsv")
    log.info("wrote %d QQ and %d AA pairs to %s", n_qq, n_aa, out)
    return EXIT_OK


def cmd_build_graph(args) -> int:
    ds = _load(args)
    scorers, _ = make_scorers(args, ds, args.graph)
    cfg = make_run_config(args)
    ctx = RunContext.create(ds, scorers, cfg, keep_graphs=True)
    qids = args.question or [q.id for q in ds.questions_in(cfg.eval_split)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = []
    for qid in qids:
        g = build_graph(ctx, qid)
        g.dump(out / f"{qid}.json")
        graphs.append(g)
    st = graph_stats(graphs)
    log.info("built %d graphs: %d nodes, %d edges", st.n_graphs, st.nodes, st.edges)
    print(json.dumps(st.to_json(), sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    graphs = [QaGraph.load(p) for p in args.graph_file]
    graph = graphs[0] if len(graphs) == 1 else disjoint_union(graphs)[0]
    model = GcnModel(dropout=args.dropout, lr=args.lr, seed=args.seed)
    fit = train(model, graph, TrainConfig(epochs=args.epochs, patience=args.patience))
    save_checkpoint(fit, args.out)
    log.info("trained %d epochs; w1=%.6g w2=%.6g", fit.state.epoch, fit.model.w1, fit.model.w2)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    graphs = [QaGraph.load(p) for p in args.graph_file]
    results = []
    for g in graphs:
        if not g.test_nodes():
            continue
        r = result_from_scores(g, predict(model, g), args.tie_eps)
        if g.metadata.get("family") == "eqag" or r.decidable:
            results.append(r)
    rep = report(results, len(graphs), graph_stats(graphs), {"checkpoint": args.checkpoint})
    text = rep.dumps()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _inputs_echo(args, sources: dict) -> dict:
    return {"dataset": str(args.dataset), "scores": sources}


def cmd_run(args) -> int:
    ds = _load(args)
    scorers, sources = make_scorers(args, ds, args.graph)
    cfg = make_run_config(args)
    ctx = RunContext.create(ds, scorers, cfg, keep_graphs=args.save_graphs)
    rep, outcomes = run_pipeline(ctx, jobs=args.jobs, skip_errors=args.skip_errors)
    rep.config["inputs"] = _inputs_echo(args, sources)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(rep.dumps(), encoding="utf-8")
    with (out / "results.jsonl").open("w", encoding="utf-8") as fh:
        for o in outcomes:
            rec = {"question_id": o.question_id, "error": o.error,
                   "baseline": o.baseline.to_json(),
                   "gnn": None if o.result is None else o.result.to_json()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _write_json(out / "timings.json", {
        "per_question": {o.question_id: {"build_seconds": o.build_seconds,
                                         "train_seconds": o.train_seconds,
                                         "epochs": o.epochs} for o in outcomes},
        "mean_build_seconds": sum(o.build_seconds for o in outcomes) / len(outcomes),
    })
    if args.save_graphs:
        gdir = out / "graphs"
        gdir.mkdir(exist_ok=True)
        for o in outcomes:
            if o.graph is not None:
                o.graph.dump(gdir / f"{o.question_id}.json")
    print(rep.render_table())
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    ds = _load(args)
    scorers, _ = make_scorers(args, ds, args.graph)
    cfg = make_run_config(args)
    rows = sweep(ds, scorers, cfg, grid, jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "dev_p_at_1"])
        for param, value, p in rows:
            w.writerow([param, value, repr(p)])
    for param, value, p in rows:
        print(f"{param:10s} {value!s:>6s}  {p:.4f}")
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "derive-pairs": cmd_derive_pairs,
    "build-graph": cmd_build_graph,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "run": cmd_run,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, MissingScoreError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
