"""
Recall against probes
=====================

A clustered index scores only the members of the clusters it probes.  Recall
rises with the probe count and reaches 1.0 when every cluster is probed,
because the same raw vectors are scored either way.
"""

import math

import numpy as np

from stylerag.index import SearchRequest, build_clustered, build_exact, recall_sweep, search

###############################################################################
# Two thousand random 32-dimensional records and their sqrt(N) clusters.

rng = np.random.default_rng(0)
pairs = [(f"clip-{i:04d}", v) for i, v in enumerate(rng.normal(size=(2000, 32)))]
c = math.ceil(math.sqrt(len(pairs)))
index = build_clustered(pairs, c, seed=0)
sizes = sorted(len(m) for _, m in index.clusters())
print(f"{c} clusters, sizes {sizes[0]}..{sizes[-1]}")

###############################################################################
# Sweep the probe count.  The default is ceil(sqrt(C)).

queries = rng.normal(size=(100, 32))
probes = [1, 2, 4, index.default_probes(), 16, 32, c]
print(" probes  recall@3  ms/query")
for row in recall_sweep(index, queries, probes, k=3):
    print(f"{row['probes']:7d}  {row['recall']:8.3f}  {row['mean_latency_ms']:8.3f}")

###############################################################################
# Probing every cluster gives exactly the exact-mode answer.

exact = build_exact(pairs)
q = queries[0]
print(search(index, SearchRequest(q, 3, probes=c)) == search(exact, SearchRequest(q, 3)))
