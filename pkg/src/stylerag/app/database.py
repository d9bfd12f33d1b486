"""On-disk style database: build it from a manifest, open it for retrieval.

A database directory holds::

    index.asrx      binary MIPS index
    records.jsonl   knowledge records (clip metadata + 32-bit embedding)
    clips.jsonl     accepted clips only
    segments.jsonl  post-VAD segments
    report.json     ingestion report
    db.json         build settings needed to query consistently
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Any

from ..embedders import EmbedderSet
from ..errors import EmptyInput
from ..index import StyleIndex, build_clustered, build_exact, load_index, rebuild, save_index
from ..ingestion import (
    ChunkPolicy,
    CorpusManifest,
    IngestionReport,
    load_records,
    run_pipeline,
    write_report_files,
)
from ..retrieval import RecordStore, RetrievalConfig, StyleRetriever
from .config import AppConfig

INDEX_FILE = "index.asrx"
RECORDS_FILE = "records.jsonl"
META_FILE = "db.json"


def embedders_for(config: AppConfig, dim: int, embed_seed: int) -> EmbedderSet:
    if config.embedder_address:
        return EmbedderSet.http(config.embedder_address, dim, config.embedder_timeout_ms)
    return EmbedderSet.reference(dim, embed_seed)


def default_clusters(count: int) -> int:
    return max(1, min(count, math.ceil(math.sqrt(count))))


def build_index(records: list, config: AppConfig) -> StyleIndex:
    if config.index_mode == "exact":
        return build_exact(records, normalize=config.normalize)
    c = config.n_clusters or default_clusters(len(records))
    return build_clustered(records, c, config.seed, config.max_iters, normalize=config.normalize)


def build_database(config: AppConfig, manifest: CorpusManifest, out_dir: str) -> tuple[IngestionReport, StyleIndex | None]:
    """Ingest ``manifest`` and write a complete database into ``out_dir``.

    The index is only written when at least one record was accepted.
    """
    policy = ChunkPolicy(quality_threshold=config.quality_threshold)
    embedders = embedders_for(config, config.dim, config.embed_seed)
    report = run_pipeline(manifest, policy, embedders, config.dim, window=config.window, workers=config.workers)
    write_report_files(report, out_dir)
    if not report.accepted:
        return report, None
    index = build_index(report.accepted, config)
    save_index(index, os.path.join(out_dir, INDEX_FILE))
    meta = {
        "version": 1,
        "dim": config.dim,
        "embed_seed": config.embed_seed,
        "window": config.window,
        "index_mode": index.mode.value,
        "n_clusters": index.n_clusters,
        "seed": config.seed,
        "max_iters": config.max_iters,
        "normalize": config.normalize,
        "quality_threshold": config.quality_threshold,
        "record_count": index.count,
    }
    with open(os.path.join(out_dir, META_FILE), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    return report, index


def resolve_db_dir(path: str) -> str:
    """Accept either the database directory or its index file."""
    return os.path.dirname(os.path.abspath(path)) if os.path.isfile(path) else path


@dataclass
class StyleDatabase:
    path: str
    meta: dict[str, Any]
    index: StyleIndex
    store: RecordStore

    @classmethod
    def open(cls, path: str) -> "StyleDatabase":
        db_dir = resolve_db_dir(path)
        index_path = path if os.path.isfile(path) else os.path.join(db_dir, INDEX_FILE)
        if not os.path.exists(index_path):
            raise FileNotFoundError(f"no index at {index_path}")
        index = load_index(index_path)
        meta: dict[str, Any] = {"dim": index.dim, "embed_seed": 0, "window": 5}
        meta_path = os.path.join(db_dir, META_FILE)
        if os.path.exists(meta_path):
            with open(meta_path, encoding="utf-8") as fh:
                meta.update(json.load(fh))
        records_path = os.path.join(db_dir, RECORDS_FILE)
        store = RecordStore(load_records(records_path)) if os.path.exists(records_path) else RecordStore()
        return cls(db_dir, meta, index, store)

    def retriever(self, config: AppConfig) -> StyleRetriever:
        endpoints = embedders_for(config, self.index.dim, int(self.meta.get("embed_seed", 0)))
        return StyleRetriever(self.index, self.store, endpoints)

    def retrieval_config(self, config: AppConfig, **overrides: Any) -> RetrievalConfig:
        base = {"k": config.k, "probes": config.probes, "window": int(self.meta.get("window", config.window))}
        base.update({k: v for k, v in overrides.items() if v is not None})
        return RetrievalConfig(**base)

    def rebuild(self, n_clusters: int | None = None, seed: int | None = None) -> StyleIndex:
        if self.index.count == 0:
            raise EmptyInput("nothing to rebuild")
        c = n_clusters or self.index.n_clusters or default_clusters(self.index.count)
        self.index = rebuild(self.index, c, seed)
        save_index(self.index, os.path.join(self.path, INDEX_FILE))
        self.meta.update({"index_mode": self.index.mode.value, "n_clusters": self.index.n_clusters,
                          "seed": self.index.build_seed, "record_count": self.index.count})
        with open(os.path.join(self.path, META_FILE), "w", encoding="utf-8") as fh:
            json.dump(self.meta, fh, indent=1)
        return self.index
