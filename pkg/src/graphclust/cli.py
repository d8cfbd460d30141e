"""Command-line entry point: ``graphclust {estimate,simulate,verify,graph}``.

Exit codes: 0 ok, 1 input error, 2 no valid k, 3 verification failure.
"""
import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, graph as gr, oracle, simlab
from .cluster import KMeansConfig, kmeans, load_labels
from .edgecount import DegenerateMomentError, estimate_k

EXIT_OK, EXIT_INPUT, EXIT_NO_K, EXIT_VERIFY = 0, 1, 2, 3


class InputError(Exception):
    pass


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _resolved(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "threads", "out")}
    cfg["version"] = __version__
    return cfg


def _csv_header(cfg):
    return f"# config: {json.dumps(cfg, sort_keys=True)}\n"


def _k_seed(seed, k):
    return int(np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0])


def _build_graph(args, D, n):
    if args.graph == "external":
        if not args.edges:
            raise InputError("--graph external requires --edges PATH")
        return gr.read_edge_list(args.edges, n=n)
    if D is None:
        raise InputError(f"--graph {args.graph} requires --input data CSV")
    if args.graph == "kmst":
        return gr.build_kmst(D, args.graph_k)
    return gr.build_knn(D, args.graph_k)


def _labeler(args, X):
    if args.clusterer == "kmeans":
        if X is None:
            raise InputError("--clusterer kmeans requires --input data CSV")
        return lambda k: kmeans(X, KMeansConfig(k, restarts=args.restarts,
                                                seed=_k_seed(args.seed, k)))
    if not args.labels_dir:
        raise InputError("--clusterer labels-dir requires --labels-dir PATH")
    root = Path(args.labels_dir)
    if not root.is_dir():
        raise InputError(f"labels directory not found: {root}")
    return lambda k: load_labels(root / f"labels_k{k}.txt")


def _label_n(args):
    for p in sorted(Path(args.labels_dir).glob("labels_k*.txt")):
        return load_labels(p).n
    raise InputError(f"no labels_k*.txt files in {args.labels_dir}")


def cmd_estimate(args):
    X = D = None
    if args.input:
        X = gr.read_matrix(args.input)
        if len(X) < 4:
            raise InputError("n < 4: null variance undefined")
        D = gr.pairwise_distances(X, args.metric)
    n = len(X) if X is not None else (_label_n(args) if args.labels_dir else None)
    if n is not None and n < 4:
        raise InputError("n < 4: null variance undefined")
    if args.kmin > args.kmax:
        raise InputError(f"kmin = {args.kmin} exceeds kmax = {args.kmax}")
    G = _build_graph(args, D, n)
    profile = estimate_k(G, _labeler(args, X), args.kmin, args.kmax)
    profile.meta = {"config": _resolved(args)}
    if args.format == "json":
        text = profile.to_json()
    else:
        text = _csv_header(profile.meta["config"]) + profile.to_csv()
    if args.out:
        write_atomic(args.out, text)
    print(f"chosen_k: {profile.chosen_k if profile.chosen_k is not None else 'none'}")
    print(f"{'k':>3} {'W':>12} {'E':>12} {'Var':>12} {'Q':>12} {'Z':>9} valid")
    for r in profile.records:
        print(f"{r.k:>3} {r.W:>12.6g} {r.E:>12.6g} {r.var:>12.6g} {r.Q:>12.6g} "
              f"{r.z:>9.4g} {'yes' if r.valid else 'no (' + r.reason + ')'}")
    if profile.chosen_k is None:
        print(profile.reason, file=sys.stderr)
        return EXIT_NO_K
    return EXIT_OK


def cmd_simulate(args):
    if args.kmin > args.kmax:
        raise InputError(f"kmin = {args.kmin} exceeds kmax = {args.kmax}")
    try:
        spec = simlab.get_scenario(args.scenario, args.config, seed=args.seed)
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc)) from None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    tables, results = simlab.run_replicates(
        spec, methods, args.reps, args.kmin, args.kmax, args.graph_k,
        args.metric, args.restarts, threads=args.threads)
    cfg = _resolved(args)
    cfg["scenario_spec"] = {k: v for k, v in vars(spec).items()}
    out = Path(args.out)
    write_atomic(out / f"freq_{spec.id}.csv",
                 _csv_header(cfg) + simlab.tables_to_csv(tables, args.kmax))
    ks = sorted({k for r in results for k in r.accuracy})
    acc_lines = ["k,mean_accuracy,replicates"]
    for k in ks:
        vals = [r.accuracy[k] for r in results if k in r.accuracy]
        acc_lines.append(f"{k},{float(np.mean(vals))!r},{len(vals)}")
    write_atomic(out / f"accuracy_{spec.id}.csv", _csv_header(cfg) + "\n".join(acc_lines) + "\n")
    detail = {
        "config": cfg,
        "reconstructed_parameters": True,
        "tables": [{"method": t.method, "counts": {str(k): v for k, v in sorted(t.counts.items())},
                    "replicates": t.replicates, "failures": t.failures} for t in tables],
        "replicates": [{"rep": r.rep, "chosen": r.chosen,
                        "accuracy": {str(k): v for k, v in r.accuracy.items()},
                        "Q": {str(k): (v if np.isfinite(v) else None) for k, v in r.q.items()},
                        "silhouette": {str(k): v for k, v in r.silhouette.items()},
                        "graph_builds": r.graph_builds, "error": r.error} for r in results],
    }
    write_atomic(out / f"run_{spec.id}.json", json.dumps(detail, indent=2) + "\n")
    for t in tables:
        print(f"{t.method}: " + " ".join(f"k={k}:{c}" for k, c in sorted(t.counts.items()))
              + (f" failures={t.failures}" if t.failures else ""))
    return EXIT_OK


def cmd_verify(args):
    report = oracle.verify(seed=args.seed, n_graphs=args.graphs, mc_draws=args.mc_draws,
                           fault=args.inject_fault)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    if args.out:
        print(f"pass: {report['pass']}  max_rel_err: {report['max_rel_err']:.3g}")
    if not report["pass"]:
        for f in report["failures"][:20]:
            print(f"FAIL {json.dumps(f)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_graph(args):
    if not args.input:
        raise InputError("graph requires --input data CSV")
    X = gr.read_matrix(args.input)
    D = gr.pairwise_distances(X, args.metric)
    if args.graph == "external":
        raise InputError("graph construction needs --graph kmst or knn")
    G = gr.build_kmst(D, args.graph_k) if args.graph == "kmst" else gr.build_knn(D, args.graph_k)
    header = _csv_header(_resolved(args))
    _emit(header + gr.format_edge_list(G), args.out)
    return EXIT_OK


def _common(p, graph_k=10):
    p.add_argument("--graph", choices=["kmst", "knn", "external"], default="kmst")
    p.add_argument("--graph-k", type=int, default=graph_k,
                   help="trees in the K-MST or neighbours in the K-NN graph (default 10)")
    p.add_argument("--metric", choices=["euclidean", "sqeuclidean", "manhattan"],
                   default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="graphclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate k for a data set")
    _common(p)
    p.add_argument("--input", help="data CSV, rows = observations")
    p.add_argument("--edges", help="edge-list file for --graph external")
    p.add_argument("--kmin", type=int, default=2)
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--clusterer", choices=["kmeans", "labels-dir"], default="kmeans")
    p.add_argument("--labels-dir")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run a simulation scenario")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", help="scenario file (default: bundled scenarios.ini)")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--kmin", type=int, default=2)
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--methods", default="graph-based,silhouette")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $GRAPHCLUST_THREADS or 1)")
    p.set_defaults(func=cmd_simulate, out="results")

    p = sub.add_parser("verify", help="check closed-form moments against permutation oracles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--graphs", type=int, default=50)
    p.add_argument("--mc-draws", type=int, default=100_000)
    p.add_argument("--inject-fault", choices=["ge-sign"], default=None,
                   help=argparse.SUPPRESS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("graph", help="build a similarity graph and write it as an edge list")
    _common(p)
    p.add_argument("--input", help="data CSV, rows = observations")
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("graph_k", "kmin", "kmax", "reps", "restarts"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            print(f"error: --{name.replace('_', '-')} must be >= 1", file=sys.stderr)
            return EXIT_INPUT
    try:
        with threadpool_limits(1):
            return args.func(args)
    except gr.InfeasibleGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, DegenerateMomentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
