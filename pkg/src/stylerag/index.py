"""Maximum inner product search over style vectors.

Two modes share one scoring path:

* ``exact``: score every stored vector against the query.
* ``clustered``: spherical k-means partitions the *directions* of the stored
  vectors; a query scores the unit centroids, probes the best clusters and
  scores only their members.  Scoring always uses the raw, unnormalized
  vectors, so probing every cluster reproduces exact search bit for bit.

Hits are ordered by score (descending), then by clip_id (ascending).  Rows
are kept sorted by clip_id, which lets the row index stand in for the id in
the tie-break.

File format (little-endian)::

    b"ASRX" | u16 version
    header:  u8 mode | u8 normalize | u32 dim | u32 count | u32 n_clusters
             | i64 build_seed | u32 max_iters
    sections (in order IDS_, VECS, CENT, ASGN), each: 4-byte tag | u64 length | payload
        IDS_  per id: u32 byte length | UTF-8 bytes
        VECS  count x dim float32
        CENT  n_clusters x dim float64
        ASGN  count uint32 cluster labels
    u32 CRC32 of every preceding byte
"""

from __future__ import annotations

import bisect
import enum
import io
import math
import os
import struct
import time
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import KnowledgeRecord, as_vector
from .errors import (
    CorruptFile,
    DimensionMismatch,
    DuplicateClipId,
    EmptyInput,
    ModeMismatch,
    TooManyClusters,
    UnknownClipId,
    UnsupportedVersion,
)

MAGIC = b"ASRX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<BBIIIqI")
_SECTION = struct.Struct("<4sQ")


class IndexMode(str, enum.Enum):
    EXACT = "exact"
    CLUSTERED = "clustered"


_MODE_CODES = {IndexMode.EXACT: 0, IndexMode.CLUSTERED: 1}


@dataclass(frozen=True)
class SearchRequest:
    query: np.ndarray
    k: int = 3
    probes: int | None = None  # None: ceil(sqrt(n_clusters))

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.probes is not None and self.probes < 1:
            raise ValueError("probes must be >= 1")


@dataclass(frozen=True)
class RetrievalHit:
    clip_id: str
    score: float
    rank: int


@dataclass(eq=False)
class StyleIndex:
    """Immutable MIPS index.  ``insert``/``remove`` return new instances."""

    dim: int
    mode: IndexMode
    ids: tuple[str, ...]
    vectors: np.ndarray  # (count, dim) float32, rows in clip_id order
    centroids: np.ndarray | None = None  # (n_clusters, dim) float64, unit rows
    assignments: np.ndarray | None = None  # (count,) uint32
    normalize: bool = False
    build_seed: int = 0
    max_iters: int = 0
    format_version: int = FORMAT_VERSION
    search_calls: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.vectors.setflags(write=False)
        if self.vectors.shape != (len(self.ids), self.dim):
            raise DimensionMismatch(f"vector table {self.vectors.shape} vs {len(self.ids)} ids x {self.dim}")
        self._scoring = self.vectors.astype(np.float64)
        self._row_of = {cid: i for i, cid in enumerate(self.ids)}
        self._members: list[np.ndarray] | None = None
        if self.mode is IndexMode.CLUSTERED:
            assert self.centroids is not None and self.assignments is not None
            self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float64)
            self.assignments = np.ascontiguousarray(self.assignments, dtype=np.uint32)
            self.centroids.setflags(write=False)
            self.assignments.setflags(write=False)
            self._members = [
                np.flatnonzero(self.assignments == c) for c in range(self.n_clusters)
            ]

    @property
    def count(self) -> int:
        return len(self.ids)

    @property
    def n_clusters(self) -> int:
        return 0 if self.centroids is None else int(self.centroids.shape[0])

    @property
    def header(self) -> dict[str, object]:
        return {
            "format_version": self.format_version,
            "normalize": self.normalize,
            "count": self.count,
            "build_seed": self.build_seed,
        }

    def clusters(self) -> list[tuple[np.ndarray, list[str]]]:
        """``(centroid, member_ids)`` per cluster; empty for exact mode."""
        if self._members is None:
            return []
        return [
            (self.centroids[c], [self.ids[i] for i in members])  # type: ignore[index]
            for c, members in enumerate(self._members)
        ]

    def vector(self, clip_id: str) -> np.ndarray:
        try:
            return self.vectors[self._row_of[clip_id]]
        except KeyError:
            raise UnknownClipId(clip_id) from None

    def __contains__(self, clip_id: object) -> bool:
        return clip_id in self._row_of

    def default_probes(self) -> int:
        return max(1, math.ceil(math.sqrt(self.n_clusters)))


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt((x * x).sum(axis=1))
    out = np.zeros_like(x)
    nz = norms > 0
    out[nz] = x[nz] / norms[nz, None]
    return out


def _prepare(
    records: Iterable[KnowledgeRecord | tuple[str, Sequence[float]]], normalize: bool
) -> tuple[list[str], np.ndarray]:
    pairs: list[tuple[str, np.ndarray]] = []
    for rec in records:
        if isinstance(rec, KnowledgeRecord):
            pairs.append((rec.clip_id, rec.embedding.values))
        else:
            cid, vec = rec
            pairs.append((str(cid), as_vector(vec)))
    if not pairs:
        raise EmptyInput("no records to index")
    dims = {v.shape[0] for _, v in pairs}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed record dimensions: {sorted(dims)}")
    seen: set[str] = set()
    for cid, _ in pairs:
        if cid in seen:
            raise DuplicateClipId(cid)
        seen.add(cid)
    pairs.sort(key=lambda p: p[0])
    ids = [cid for cid, _ in pairs]
    table = np.stack([v for _, v in pairs]).astype(np.float32)
    if normalize:
        table = _unit_rows(table.astype(np.float64)).astype(np.float32)
    return ids, table


def build_exact(
    records: Iterable[KnowledgeRecord | tuple[str, Sequence[float]]],
    *,
    normalize: bool = False,
) -> StyleIndex:
    ids, table = _prepare(records, normalize)
    return StyleIndex(table.shape[1], IndexMode.EXACT, tuple(ids), table, normalize=normalize)


def _basis(dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def _seed_centroids(xn: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding with cosine distance ``1 - cos``."""
    n, dim = xn.shape
    chosen = [int(rng.integers(n))]
    dist = np.maximum(1.0 - xn @ xn[chosen[0]], 0.0)
    dist[chosen[0]] = 0.0
    while len(chosen) < n_clusters:
        total = dist.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=dist / total))
        else:
            free = np.setdiff1d(np.arange(n), np.asarray(chosen))
            nxt = int(free[rng.integers(free.size)])
        chosen.append(nxt)
        dist = np.minimum(dist, np.maximum(1.0 - xn @ xn[nxt], 0.0))
        dist[chosen] = 0.0
    cents = xn[chosen].copy()
    for row in range(n_clusters):
        if not np.any(cents[row]):
            cents[row] = _basis(dim)
    return cents


def _repair_empty(
    xn: np.ndarray, labels: np.ndarray, sims: np.ndarray, cents: np.ndarray
) -> None:
    """Give every empty cluster the worst-fitting member of the largest cluster."""
    n_clusters = cents.shape[0]
    while True:
        counts = np.bincount(labels, minlength=n_clusters)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return
        target = int(empty[0])
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        fit = sims[members, largest]
        donor = int(members[np.lexsort((members, fit))[0]])
        labels[donor] = target
        cents[target] = xn[donor] if np.any(xn[donor]) else _basis(xn.shape[1])


def spherical_kmeans(
    x: np.ndarray, n_clusters: int, seed: int, max_iters: int = 25
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster row directions of ``x``.

    Returns ``(centroids, labels)`` with unit-norm centroids.  Assignment is
    by maximum cosine (lowest cluster index on ties); iteration stops when no
    label changes or after ``max_iters`` passes.
    """
    n = x.shape[0]
    if n == 0:
        raise EmptyInput("no vectors to cluster")
    if not 1 <= n_clusters <= n:
        raise TooManyClusters(f"n_clusters={n_clusters} with {n} records")
    xn = _unit_rows(np.asarray(x, dtype=np.float64))
    rng = np.random.default_rng(seed)
    cents = _seed_centroids(xn, n_clusters, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max(1, max_iters)):
        sims = xn @ cents.T
        new = np.argmax(sims, axis=1)
        _repair_empty(xn, new, sims, cents)
        if np.array_equal(new, labels):
            break
        labels = new
        sums = np.zeros_like(cents)
        np.add.at(sums, labels, xn)
        norms = np.sqrt((sums * sums).sum(axis=1))
        ok = norms > 0
        cents[ok] = sums[ok] / norms[ok, None]
    return cents, labels


def build_clustered(
    records: Iterable[KnowledgeRecord | tuple[str, Sequence[float]]],
    n_clusters: int,
    seed: int = 0,
    max_iters: int = 25,
    *,
    normalize: bool = False,
) -> StyleIndex:
    ids, table = _prepare(records, normalize)
    if n_clusters > len(ids) or n_clusters < 1:
        raise TooManyClusters(f"n_clusters={n_clusters} with {len(ids)} records")
    cents, labels = spherical_kmeans(table.astype(np.float64), n_clusters, seed, max_iters)
    return StyleIndex(
        table.shape[1],
        IndexMode.CLUSTERED,
        tuple(ids),
        table,
        centroids=cents,
        assignments=labels.astype(np.uint32),
        normalize=normalize,
        build_seed=seed,
        max_iters=max_iters,
    )


def _ranked(index: StyleIndex, rows: np.ndarray, scores: np.ndarray, k: int) -> list[RetrievalHit]:
    order = np.lexsort((rows, -scores))[:k]
    return [
        RetrievalHit(index.ids[int(rows[o])], float(scores[o]), rank)
        for rank, o in enumerate(order, start=1)
    ]


def search(index: StyleIndex, request: SearchRequest) -> list[RetrievalHit]:
    """Top-k records by inner product with ``request.query``."""
    q = as_vector(request.query, name="query")
    if q.shape[0] != index.dim:
        raise DimensionMismatch(f"query dim {q.shape[0]} != index dim {index.dim}")
    index.search_calls += 1
    if index.normalize:
        n = math.sqrt(float((q * q).sum()))
        if n > 0:
            q = q / n
    if index.count == 0:
        return []
    probes = request.probes if request.probes is not None else index.default_probes()
    if index.mode is IndexMode.EXACT or probes >= index.n_clusters:
        rows = np.arange(index.count)
    else:
        assert index.centroids is not None and index._members is not None
        cscores = (index.centroids * q).sum(axis=1)
        visit = np.lexsort((np.arange(index.n_clusters), -cscores))[:probes]
        rows = np.concatenate([index._members[c] for c in visit])
        if rows.size == 0:
            return []
    scores = (index._scoring[rows] * q).sum(axis=1)
    return _ranked(index, rows, scores, request.k)


def insert(index: StyleIndex, record: KnowledgeRecord | tuple[str, Sequence[float]]) -> StyleIndex:
    """Return a copy of ``index`` with one more record; clusters are not rebuilt."""
    if isinstance(record, KnowledgeRecord):
        cid, vec = record.clip_id, record.embedding.values
    else:
        cid, vec = str(record[0]), as_vector(record[1])
    vec = as_vector(vec)
    if vec.shape[0] != index.dim:
        raise DimensionMismatch(f"record dim {vec.shape[0]} != index dim {index.dim}")
    if cid in index:
        raise DuplicateClipId(cid)
    row = np.asarray(vec, dtype=np.float32)
    if index.normalize:
        row = _unit_rows(row[None, :].astype(np.float64))[0].astype(np.float32)
    pos = bisect.bisect_left(index.ids, cid)
    ids = index.ids[:pos] + (cid,) + index.ids[pos:]
    table = np.insert(index.vectors, pos, row, axis=0)
    assignments = None
    if index.mode is IndexMode.CLUSTERED:
        assert index.centroids is not None and index.assignments is not None
        unit = _unit_rows(row[None, :].astype(np.float64))[0]
        label = int(np.argmax(index.centroids @ unit))
        assignments = np.insert(index.assignments, pos, label)
    return StyleIndex(
        index.dim, index.mode, ids, table, index.centroids, assignments,
        index.normalize, index.build_seed, index.max_iters,
    )


def remove(index: StyleIndex, clip_id: str) -> StyleIndex:
    if clip_id not in index:
        raise UnknownClipId(clip_id)
    pos = index._row_of[clip_id]
    ids = index.ids[:pos] + index.ids[pos + 1:]
    table = np.delete(index.vectors, pos, axis=0)
    assignments = None
    if index.assignments is not None:
        assignments = np.delete(index.assignments, pos)
    return StyleIndex(
        index.dim, index.mode, ids, table, index.centroids, assignments,
        index.normalize, index.build_seed, index.max_iters,
    )


def rebuild(index: StyleIndex, n_clusters: int | None = None, seed: int | None = None) -> StyleIndex:
    """Re-cluster from scratch, e.g. after many incremental inserts."""
    pairs = list(zip(index.ids, index.vectors.astype(np.float64)))
    c = n_clusters or index.n_clusters
    if not c:
        return build_exact(pairs)
    return build_clustered(
        pairs, c, index.build_seed if seed is None else seed, index.max_iters or 25
    )


def index_to_bytes(index: StyleIndex) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", index.format_version))
    buf.write(
        _HEADER.pack(
            _MODE_CODES[index.mode], int(index.normalize), index.dim, index.count,
            index.n_clusters, index.build_seed, index.max_iters,
        )
    )
    ids = b"".join(
        struct.pack("<I", len(b)) + b for b in (cid.encode("utf-8") for cid in index.ids)
    )
    vecs = index.vectors.astype("<f4").tobytes()
    cents = b"" if index.centroids is None else index.centroids.astype("<f8").tobytes()
    asgn = b"" if index.assignments is None else index.assignments.astype("<u4").tobytes()
    for tag, payload in ((b"IDS_", ids), (b"VECS", vecs), (b"CENT", cents), (b"ASGN", asgn)):
        buf.write(_SECTION.pack(tag, len(payload)))
        buf.write(payload)
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def index_from_bytes(data: bytes) -> StyleIndex:
    if len(data) < 6 or data[:4] != MAGIC:
        raise CorruptFile("missing ASRX magic")
    (version,) = struct.unpack_from("<H", data, 4)
    if version > FORMAT_VERSION or version < 1:
        raise UnsupportedVersion(f"index format version {version} (supported: {FORMAT_VERSION})")
    if len(data) < 6 + _HEADER.size + 4:
        raise CorruptFile("file truncated")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise CorruptFile("CRC32 mismatch")
    try:
        mode_code, normalize, dim, count, n_clusters, seed, max_iters = _HEADER.unpack_from(data, 6)
        off = 6 + _HEADER.size
        sections: dict[bytes, bytes] = {}
        for _ in range(4):
            tag, length = _SECTION.unpack_from(data, off)
            off += _SECTION.size
            sections[tag] = data[off:off + length]
            if len(sections[tag]) != length:
                raise CorruptFile(f"section {tag!r} truncated")
            off += length
        if off != len(data) - 4:
            raise CorruptFile("trailing bytes before checksum")
        ids: list[str] = []
        raw, p = sections[b"IDS_"], 0
        for _ in range(count):
            (n,) = struct.unpack_from("<I", raw, p)
            ids.append(raw[p + 4:p + 4 + n].decode("utf-8"))
            p += 4 + n
        vecs = np.frombuffer(sections[b"VECS"], dtype="<f4").reshape(count, dim)
        mode = IndexMode.CLUSTERED if mode_code == 1 else IndexMode.EXACT
        cents = asgn = None
        if mode is IndexMode.CLUSTERED:
            cents = np.frombuffer(sections[b"CENT"], dtype="<f8").reshape(n_clusters, dim)
            asgn = np.frombuffer(sections[b"ASGN"], dtype="<u4").reshape(count)
    except (struct.error, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"malformed index body: {exc}") from exc
    return StyleIndex(
        dim, mode, tuple(ids), vecs.astype(np.float32), cents, asgn,
        bool(normalize), seed, max_iters, version,
    )


def save_index(index: StyleIndex, path: str | os.PathLike[str]) -> None:
    data = index_to_bytes(index)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_index(path: str | os.PathLike[str]) -> StyleIndex:
    with open(path, "rb") as fh:
        return index_from_bytes(fh.read())


def recall_sweep(
    index: StyleIndex, queries: np.ndarray, probes: Sequence[int], k: int
) -> list[dict[str, float]]:
    """Mean recall@k of clustered search against exhaustive search, per probe count.

    Returns one row per probe value: ``probes, k, recall, mean_latency_ms``.
    """
    if index.mode is not IndexMode.CLUSTERED:
        raise ModeMismatch("recall evaluation needs a clustered index")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    full = index.n_clusters
    truth = [{h.clip_id for h in search(index, SearchRequest(q, k, full))} for q in queries]
    rows = []
    for p in probes:
        hit = 0
        total = 0
        elapsed = 0.0
        for q, exact in zip(queries, truth):
            t0 = time.perf_counter()
            got = search(index, SearchRequest(q, k, int(p)))
            elapsed += time.perf_counter() - t0
            hit += len(exact & {h.clip_id for h in got})
            total += len(exact)
        rows.append({
            "probes": int(p),
            "k": k,
            "recall": hit / total if total else 1.0,
            "mean_latency_ms": 1000.0 * elapsed / max(len(queries), 1),
        })
    return rows
