"""Independent reference computations used as test oracles.

Pure Python on purpose: nothing here shares code with the package.
"""

from __future__ import annotations

import json


def dot(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += float(x) * float(y)
    return total


def brute_force_topk(pairs, query, k):
    """Top-k ``(clip_id, score)`` by inner product, ties by ascending id."""
    scored = [(cid, dot(vec, query)) for cid, vec in pairs]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


def pairs_from_records_jsonl(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            out.append((row["clip"]["clip_id"], [float(x) for x in row["embedding"]]))
    return out


def nearest_centroid(point, centroids):
    """Index of the centroid with the largest cosine to ``point``."""
    def norm(v):
        return sum(x * x for x in v) ** 0.5

    best, best_cos = -1, None
    for i, c in enumerate(centroids):
        cos = dot(point, c) / (norm(point) * norm(c))
        if best_cos is None or cos > best_cos:
            best, best_cos = i, cos
    return best
