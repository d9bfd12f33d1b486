"""``stylerag`` command line.

Subcommands: build-db, query, serve, eval-recall, rebuild-index.  Every flag
can also come from a ``STYLERAG_<NAME>`` environment variable or a
``key = value`` config file (``--config`` or ``STYLERAG_CONFIG``); flags win.
Failures print ``{"error": {"code": ..., "message": ...}}`` on stderr and
exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from typing import Any, Sequence

import numpy as np

from ..core import Script, StyleQuery, UserPreference
from ..errors import EmptyInput, StyleRagError
from ..index import IndexMode, recall_sweep
from ..ingestion import CorpusManifest
from .config import AppConfig, load_config
from .database import StyleDatabase, build_database
from .logs import setup_logging

log = logging.getLogger("stylerag.cli")


def _fail(code: str, message: str, status: int = 1) -> int:
    print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)
    return status


def _config(args: argparse.Namespace, **flags: Any) -> AppConfig:
    return load_config(flags, config_path=args.config)


def cmd_build_db(args: argparse.Namespace) -> int:
    config = _config(
        args, dim=args.dim, quality_threshold=args.threshold, n_clusters=args.k_clusters,
        index_mode=args.index_mode, seed=args.seed, workers=args.workers, embed_seed=args.embed_seed,
        db_dir=args.out,
    )
    try:
        manifest = CorpusManifest.load(args.manifest)
    except EmptyInput as exc:
        return _fail(exc.code, str(exc))
    except (OSError, ValueError, KeyError) as exc:
        return _fail("BadManifest", str(exc))
    report, index = build_database(config, manifest, config.db_dir)
    counts = report.to_dict()["counts"]
    print(json.dumps({"db_dir": config.db_dir, "counts": counts,
                      "index": None if index is None else {"mode": index.mode.value, "count": index.count,
                                                           "n_clusters": index.n_clusters}}))
    if index is None:
        return _fail("EmptyInput", "no record passed ingestion", 2)
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    config = _config(args, k=args.k, probes=args.probes)
    try:
        db = StyleDatabase.open(args.index)
        script = Script.load(args.script)
        pref = None
        if args.pref_file:
            with open(args.pref_file, encoding="utf-8") as fh:
                pref = UserPreference.from_dict(json.load(fh))
        explicit = db.store[args.explicit_clip].clip if args.explicit_clip else None
        query = StyleQuery.for_script(script, args.position, user_pref=pref,
                                      explicit_style_clip=explicit, k=config.k)
        rconf = db.retrieval_config(config, k=config.k, embedding_mode=args.mode)
        bundle = db.retriever(config).retrieve(query, rconf, script)
    except StyleRagError as exc:
        return _fail(exc.code, str(exc))
    except FileNotFoundError as exc:
        return _fail("NotFound", str(exc))
    except (OSError, ValueError, KeyError) as exc:
        return _fail("BadInput", str(exc))
    print(bundle.to_json())
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve

    config = _config(args, listen=args.listen, scripts_dir=args.scripts, k=args.k)
    try:
        return serve(config, args.index)
    except (OSError, StyleRagError) as exc:
        return _fail(getattr(exc, "code", "StartupFailure"), str(exc))


def _load_queries(path: str | None, n: int, dim: int, seed: int) -> np.ndarray:
    if path is None:
        return np.random.default_rng(seed).normal(size=(n, dim))
    if path.endswith(".npy"):
        return np.load(path)
    with open(path, encoding="utf-8") as fh:
        return np.asarray(json.load(fh), dtype=np.float64)


def cmd_eval_recall(args: argparse.Namespace) -> int:
    try:
        db = StyleDatabase.open(args.index)
    except (OSError, StyleRagError) as exc:
        return _fail(getattr(exc, "code", "NotFound"), str(exc))
    index = db.index
    if index.mode is not IndexMode.CLUSTERED:
        return _fail("ModeMismatch", "eval-recall needs a clustered index")
    if args.probes:
        probes = [int(p) for p in args.probes.split(",")]
    else:
        probes, p = [], 1
        while p < index.n_clusters:
            probes.append(p)
            p *= 2
        probes.append(index.n_clusters)
    queries = _load_queries(args.queries, args.n_queries, index.dim, args.seed)
    if queries.ndim != 2 or queries.shape[1] != index.dim:
        return _fail("DimensionMismatch", f"queries must be (n, {index.dim}), got {queries.shape}")
    rows = recall_sweep(index, queries, probes, args.k)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["probes", "k", "recall", "mean_latency"])
        for r in rows:
            writer.writerow([r["probes"], r["k"], f"{r['recall']:.6f}", f"{r['mean_latency_ms']:.4f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_rebuild_index(args: argparse.Namespace) -> int:
    try:
        db = StyleDatabase.open(args.index)
        index = db.rebuild(args.k_clusters, args.seed)
    except (OSError, StyleRagError) as exc:
        return _fail(getattr(exc, "code", "NotFound"), str(exc))
    print(json.dumps({"count": index.count, "n_clusters": index.n_clusters, "seed": index.build_seed}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stylerag", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="key = value config file (env: STYLERAG_CONFIG)")
    parser.add_argument("--log-level", default=None, help="log level (env: STYLERAG_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-db", help="ingest a corpus manifest and build the style database")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="database directory (env: STYLERAG_DB_DIR)")
    p.add_argument("--dim", type=int, help="embedding dimension, default 256")
    p.add_argument("--threshold", type=float, help="quality threshold, default 0.6 (strict >)")
    p.add_argument("--k-clusters", type=int, help="clusters, default ceil(sqrt(records))")
    p.add_argument("--index-mode", choices=("exact", "clustered"))
    p.add_argument("--seed", type=int, help="clustering seed")
    p.add_argument("--embed-seed", type=int, help="reference embedder seed")
    p.add_argument("--workers", type=int, help="parallel manifest entries")
    p.set_defaults(func=cmd_build_db)

    p = sub.add_parser("query", help="select style prompts for one script line")
    p.add_argument("--index", required=True, help="database directory or index file")
    p.add_argument("--script", required=True, help="script JSON file")
    p.add_argument("--position", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--mode", default="profile+emotion",
                   help="profile+emotion | only-profile | only-emotion")
    p.add_argument("--probes", type=int)
    p.add_argument("--pref-file", help="JSON user preference")
    p.add_argument("--explicit-clip", help="clip_id to use instead of retrieving")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("serve", help="run the HTTP retrieval service")
    p.add_argument("--index", required=True)
    p.add_argument("--listen", help="host:port, default 127.0.0.1:8080")
    p.add_argument("--scripts", help="directory of script JSON files")
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval-recall", help="recall@k of clustered vs exact search, as CSV")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", help=".npy or JSON list of query vectors (default: Gaussian)")
    p.add_argument("--n-queries", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", help="comma list, default 1,2,4,...,C")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_eval_recall)

    p = sub.add_parser("rebuild-index", help="re-cluster the index from its stored vectors")
    p.add_argument("--index", required=True)
    p.add_argument("--k-clusters", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_rebuild_index)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = args.log_level or load_config({}, config_path=args.config).log_level
    setup_logging(level)
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
