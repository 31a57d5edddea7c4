"""Command-line front end: ``hetrel {train,measure,search,cluster,verify}``.

Every command accepts ``--config FILE`` with flat ``key = value`` lines whose
keys are the long option names (dashes or underscores); flags given on the
command line win over the file.  Exit codes: 0 ok, 1 verification failure,
2 usage or config error, 3 data error, 4 numeric abort.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import ExitStack, nullcontext
from pathlib import Path

import numpy as np

from . import cpgnn, measures
from .evaluation import (
    RelevanceMatrix,
    clustering_metrics,
    export_attention,
    export_relevance_matrix,
    read_relevance_matrix,
    recall_at_n,
    spectral_clustering,
    top_k_search,
)
from .hetgraph import GraphError, MetaPath, load_graph, save_graph, split_labels
from .synthetic import random_graph

log = logging.getLogger("hetrel")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4
BRUTE_FORCE_MAX_NODES = 12
INJECTIVITY_MAX_NODES = 50


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- config ------------------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise UsageError(f"{path}:{n}: empty key")
        if key in out:
            raise UsageError(f"{path}:{n}: duplicate key {key!r}")
        out[key] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, defaults: dict) -> None:
    """Fill options the command line left unset from the config file, then defaults."""
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "command")}
    values = read_config(args.config) if args.config else {}
    unknown = sorted(set(values) - set(actions))
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    for dest, action in actions.items():
        if getattr(args, dest) is not None:
            continue
        if dest in values:
            raw = values[dest]
            if isinstance(action, argparse._StoreTrueAction):
                if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise UsageError(f"config key {dest!r} expects a boolean, got {raw!r}")
                value = raw.lower() in ("true", "1", "yes")
            else:
                try:
                    value = action.type(raw) if action.type else raw
                except (TypeError, ValueError):
                    raise UsageError(f"config key {dest!r}: bad value {raw!r}") from None
                if action.choices is not None and value not in action.choices:
                    raise UsageError(f"config key {dest!r}: {value!r} not one of {sorted(action.choices)}")
            setattr(args, dest, value)
        else:
            setattr(args, dest, defaults.get(dest))
    # relative paths in the config are taken from the working directory; resolve them all now
    for dest in ("nodes", "edges", "out", "model", "matrix", "log", "attention_dir", "dump"):
        if getattr(args, dest, None):
            setattr(args, dest, Path(getattr(args, dest)).resolve())


def _require(args, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {' '.join(missing)}")


def _balance(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"loss balance must look like '1:1', got {text!r}") from None
    return a, b


# -- shared helpers ------------------------------------------------------------------


def _load(args):
    if args.nodes is None or args.edges is None:
        raise UsageError("graph input needs both --nodes and --edges")
    return load_graph(args.nodes, args.edges, undirected=not args.directed)


def _emit(lines: list[str], out: Path | None) -> None:
    text = "".join(line + "\n" for line in lines)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _summary(msg: str, out: Path | None) -> None:
    # keep the primary table clean: summaries go to stderr when the table is on stdout
    print(msg, file=sys.stdout if out is not None else sys.stderr)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


# -- train ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    _require(args, "nodes", "edges", "out")
    g = _load(args)
    if not g.labels:
        raise DataError("training needs labeled nodes")
    try:
        cfg = cpgnn.TrainConfig(
            K=args.K, d=args.d, H=args.H, node_dropout=args.node_dropout, lr=args.lr,
            max_epochs=args.max_epochs, seed=args.seed, loss_balance=args.loss_balance,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        table = split_labels(g.labels, args.seed, {v: g.type_of(v) for v in g.labels})
    except ValueError as exc:
        raise DataError(str(exc)) from None
    log_path = args.log or args.out.with_name(args.out.name + ".log")
    rows = ["epoch\tloss\tloss_supervised\tloss_self\tval"]

    def report(rec):
        line = "\t".join(
            [str(rec["epoch"])] + [repr(rec[k]) for k in ("loss", "loss_supervised", "loss_self", "val")]
        )
        rows.append(line)
        if not args.quiet:
            print(line, flush=True)

    try:
        model = cpgnn.train(g, table, cfg, callback=report)
    except cpgnn.NumericError:
        raise
    except ValueError as exc:
        raise DataError(str(exc)) from None
    M = model.relevance_matrix()
    val = [v for v in g.node_ids if table.split.get(v) == "val"]
    recalls = []
    for q in val:
        res = top_k_search(M, q, 10, type_filter=g.type_of(q))
        recalls.append(recall_at_n(res, q, g.labels, 10))
    score = float(np.mean(recalls)) if recalls else float("nan")
    rows.append(f"# val_recall@10\t{score!r}")
    cpgnn.save_model(model, args.out)
    log_path.write_text("\n".join(rows) + "\n")
    if args.attention_dir:
        export_attention(model, args.attention_dir)
    print(f"val recall@10 {score:.4f}")
    return EXIT_OK


# -- measure -------------------------------------------------------------------------


def _parse_pairs(specs) -> list[tuple[str, str]]:
    pairs = []
    for spec in specs or []:
        for item in spec.split(";"):
            item = item.strip()
            if not item:
                continue
            parts = item.split(",")
            if len(parts) != 2 or not all(parts):
                raise UsageError(f"pair must be 'a,b', got {item!r}")
            pairs.append((parts[0].strip(), parts[1].strip()))
    return pairs


def cmd_measure(args) -> int:
    method = args.method
    _require(args, "method")
    pairs = _parse_pairs(args.pairs)
    if method == "hetesim" and args.metapath is None:
        raise UsageError("--method hetesim needs --metapath")
    if method == "gsim" and args.model is None:
        raise UsageError("--method gsim needs --model")
    if method == "prw" and (args.k is None or args.k < 0 or args.k % 2):
        raise UsageError("--method prw needs an even --k >= 0 (pair-wise walk length)")

    if method == "gsim":
        model = cpgnn.load_model(args.model)
        m = model.relevance_matrix()
        score = m.score
    else:
        g = _load(args)
        if method == "simrank":
            m = measures.simrank(g, decay=args.decay, iterations=args.iterations)
            score = m.score
        elif method == "prw":
            m = measures.prw_matrix(g, args.k) if not pairs else None
            score = lambda a, b: measures.prw_brute(g, a, b, args.k)  # noqa: E731
        else:
            try:
                p = MetaPath.parse(args.metapath)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            g.check_metapath(p)
            normalized = not args.unnormalized
            m = measures.hetesim_matrix(g, p, normalized) if not pairs else None
            score = lambda a, b: measures.hetesim(g, a, b, p, normalized)  # noqa: E731

    if not pairs:
        if args.out is None:
            raise UsageError("a full relevance matrix needs --out (CSV); or give --pairs")
        export_relevance_matrix(m, args.out)
        return EXIT_OK
    lines = []
    for a, b in pairs:
        try:
            lines.append(f"{a}\t{b}\t{_fmt(score(a, b))}")
        except KeyError as exc:
            raise DataError(f"unknown node {exc.args[0]}") from None
    _emit(lines, args.out)
    return EXIT_OK


# -- search --------------------------------------------------------------------------


def cmd_search(args) -> int:
    _require(args, "model", "query")
    if args.top < 1:
        raise UsageError(f"--top must be positive, got {args.top}")
    model = cpgnn.load_model(args.model)
    if args.query not in model.node_ids:
        raise DataError(f"unknown query node {args.query!r}")
    if args.type is not None and args.type not in model.types:
        raise DataError(f"unknown node type {args.type!r}")
    M = model.relevance_matrix()
    res = top_k_search(M, args.query, args.top, type_filter=args.type)
    labels = model.labels
    lines = [f"{i}\t{v}\t{_fmt(s)}\t{labels.get(v, '-')}" for i, (v, s) in enumerate(res.hits, 1)]
    _emit(lines, args.out)
    if res.short:
        _summary(f"only {len(res.hits)} candidates available", args.out)
    if args.query in labels:
        _summary(f"recall@{args.top}\t{_fmt(recall_at_n(res, args.query, labels, args.top))}", args.out)
    return EXIT_OK


# -- cluster -------------------------------------------------------------------------


def _cluster_input(args) -> tuple[RelevanceMatrix, dict[str, str]]:
    if (args.model is None) == (args.matrix is None):
        raise UsageError("give exactly one of --model and --matrix")
    if args.matrix is not None:
        M = read_relevance_matrix(args.matrix)
        labels = {}
        if args.nodes is not None:
            labels = _read_labels(args.nodes)
        return M, labels
    model = cpgnn.load_model(args.model)
    labels = dict(model.labels)
    if args.scope == "all":
        nodes = list(model.node_ids)
    elif args.scope == "labeled":
        nodes = [v for v in model.node_ids if v in labels]
    else:
        nodes = [v for v in model.node_ids if model.split.get(v) == "test"]
    if not nodes:
        log.warning("no nodes in scope %r; clustering every node", args.scope)
        nodes = list(model.node_ids)
    return model.relevance_matrix(nodes), labels


def _read_labels(path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise DataError(f"{path}:{n}: expected node_id<TAB>type[<TAB>label]")
        if len(parts) > 2 and parts[2] != "-":
            out[parts[0]] = parts[2]
    return out


def cmd_cluster(args) -> int:
    _require(args, "k")
    if args.k < 2:
        raise UsageError(f"--k must be at least 2, got {args.k}")
    M, labels = _cluster_input(args)
    if args.k > len(M.node_ids):
        raise UsageError(f"--k {args.k} exceeds the {len(M.node_ids)} nodes to cluster")
    part = spectral_clustering(M, args.k, seed=args.seed)
    _emit([f"{v}\t{part.assignment[v]}" for v in M.node_ids], args.out)
    if args.metrics:
        scored = {v: c for v, c in part.assignment.items() if v in labels}
        if len(scored) < 2:
            log.warning("no labels for the clustered nodes; metrics skipped")
        else:
            met = clustering_metrics(scored, labels)
            for key in ("f_score", "nmi", "ari", "purity"):
                _summary(f"{key}\t{_fmt(met[key])}", args.out)
    return EXIT_OK


# -- verify --------------------------------------------------------------------------


def _dump_failure(g, args, trial: int) -> Path:
    base = args.dump or Path(f"verify_theorem{args.theorem}_trial{trial}").resolve()
    nodes, edges = base.with_name(base.name + ".nodes.tsv"), base.with_name(base.name + ".edges.tsv")
    save_graph(g, nodes, edges)
    return nodes


def cmd_verify(args) -> int:
    _require(args, "theorem")
    cap = INJECTIVITY_MAX_NODES if args.theorem == 3 else BRUTE_FORCE_MAX_NODES
    max_nodes = args.max_nodes if args.max_nodes is not None else cap
    if not 2 <= max_nodes <= cap:
        raise UsageError(f"--max-nodes must lie in [2, {cap}] for theorem {args.theorem}")
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    rng = np.random.default_rng(args.seed)
    worst, failed = 0.0, None
    for trial in range(1, args.trials + 1):
        g = random_graph(rng, n_max=max_nodes)
        if args.theorem == 3:
            ok = _injective(g)
            dev = 0.0 if ok else float("inf")
        else:
            k = int(rng.integers(1, 4))
            dev = _theorem_deviation(g, k, args.theorem)
        worst = max(worst, dev)
        if dev > args.tol:
            failed = (trial, g)
            break
    if args.theorem == 3:
        print(f"theorem 3: {trial} trials, sum-extractor messages {'distinct' if failed is None else 'COLLIDE'}")
    else:
        print(f"theorem {args.theorem}: {trial} trials, max deviation {worst:.3e}")
    if failed is not None:
        path = _dump_failure(failed[1], args, failed[0])
        print(f"FAIL at trial {failed[0]}; graph written to {path}")
        return EXIT_VERIFY
    print("PASS")
    return EXIT_OK


def _theorem_deviation(g, k: int, theorem: int) -> float:
    if theorem == 2:
        return measures.intermediate_invariance_gap(g, k)
    h = measures.gnn_identity_embeddings(g, k)
    gnn = h @ h.T
    worst = 0.0
    for i, vi in enumerate(g.node_ids):
        for j, vj in enumerate(g.node_ids):
            worst = max(worst, abs(gnn[i, j] - measures.prw_brute(g, vi, vj, 2 * k)))
    return worst


def _injective(g) -> bool:
    n = g.num_nodes
    z = np.eye(n)
    W = cpgnn.Tensor(cpgnn.sum_extractor(n))
    ii, jj = np.triu_indices(n)
    msgs = cpgnn.relation_message(cpgnn.Tensor(z[ii]), cpgnn.Tensor(z[jj]), W).data
    return len({row.tobytes() for row in msgs}) == len(ii)


# -- parser --------------------------------------------------------------------------


def _graph_opts(p) -> None:
    p.add_argument("--nodes", help="node TSV: node_id<TAB>type<TAB>label")
    p.add_argument("--edges", help="edge TSV: src<TAB>relation<TAB>dst")
    p.add_argument("--directed", action="store_true", default=None, help="keep edges one-way")


_TRAIN = cpgnn.TrainConfig()
# Option defaults, applied after the config file; the parser itself leaves
# every unset option at None so the file can fill it.
DEFAULTS = {
    "train": dict(
        seed=_TRAIN.seed, K=_TRAIN.K, d=_TRAIN.d, H=_TRAIN.H, node_dropout=_TRAIN.node_dropout,
        lr=_TRAIN.lr, max_epochs=_TRAIN.max_epochs, loss_balance=_TRAIN.loss_balance,
        directed=False, quiet=False,
    ),
    "measure": dict(decay=0.8, iterations=10, directed=False, unnormalized=False),
    "search": dict(top=10),
    "cluster": dict(seed=0, scope="test", metrics=False),
    "verify": dict(trials=50, seed=0, tol=1e-10),
}


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="hetrel", description="Relevance measures on heterogeneous graphs.")
    top.add_argument("-v", "--verbose", action="count", default=0)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a GSim model")
    _graph_opts(p)
    p.add_argument("--config")
    p.add_argument("--out", help="model file to write")
    p.add_argument("--log", help="metrics log (default: <out>.log)")
    p.add_argument("--attention-dir", help="also export relation attention CSVs here")
    p.add_argument("--seed", type=int)
    p.add_argument("--K", type=int, help="max context-path length")
    p.add_argument("--d", type=int, help="embedding dimension")
    p.add_argument("--H", type=int, help="attention heads")
    p.add_argument("--node-dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--loss-balance", type=_balance, help="w_S:w_U, e.g. 1:1")
    p.add_argument("--quiet", action="store_true", default=None, help="no per-epoch lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("measure", help="score node pairs with a relevance measure")
    _graph_opts(p)
    p.add_argument("--config")
    p.add_argument("--method", choices=["simrank", "hetesim", "prw", "gsim"])
    p.add_argument("--metapath", help="e.g. A-writes-P-writes^-1-A")
    p.add_argument("--pairs", action="append", help="'a,b' (repeatable, or ';'-separated)")
    p.add_argument("--k", type=int, help="prw: pair-wise walk length (even)")
    p.add_argument("--model", help="gsim: trained model file")
    p.add_argument("--decay", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--unnormalized", action="store_true", default=None, help="hetesim: raw meeting probability")
    p.add_argument("--out", help="output file (TSV for pairs, CSV matrix otherwise)")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("search", help="top-N relevance search from a trained model")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--query")
    p.add_argument("--top", type=int)
    p.add_argument("--type", help="only return nodes of this type")
    p.add_argument("--out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("cluster", help="spectral clustering on relevance scores")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--matrix", help="relevance matrix CSV instead of a model")
    p.add_argument("--nodes", help="node TSV supplying labels for --matrix")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scope", choices=["test", "labeled", "all"], help="nodes to cluster from a model")
    p.add_argument("--metrics", action="store_true", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("verify", help="randomized checks of the random-walk theorems")
    p.add_argument("--config")
    p.add_argument("--theorem", type=int, choices=[1, 2, 3])
    p.add_argument("--trials", type=int)
    p.add_argument("--max-nodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--dump", help="path prefix for a failing graph")
    p.set_defaults(func=cmd_verify)
    return top


def _thread_limit():
    raw = os.environ.get("HETREL_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"HETREL_THREADS must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    subparsers = parser._subparsers._group_actions[0].choices
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    logging.captureWarnings(True)
    try:
        _apply_config(subparsers[args.command], args, DEFAULTS[args.command])
        with ExitStack() as stack:
            stack.enter_context(_thread_limit())
            return args.func(args)
    except UsageError as exc:
        print(f"hetrel {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (cpgnn.NumericError, FloatingPointError) as exc:
        print(f"hetrel {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, GraphError, cpgnn.ModelFormatError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"hetrel {args.command}: {msg}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # remaining ValueErrors come from option values the parser cannot check itself
        print(f"hetrel {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
