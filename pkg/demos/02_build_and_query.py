"""
Building a style database and querying it
=========================================

Ingest the bundled sample corpus, index the clips, then pick style prompts
for each line of a script.  Everything runs in-process with no services.
"""

import tempfile

from stylerag.app.config import AppConfig
from stylerag.app.database import StyleDatabase, build_database
from stylerag.core import Script, StyleQuery
from stylerag.ingestion import CorpusManifest
from stylerag.retrieval import EmbeddingMode
from stylerag.synthetic import bundled_path

###############################################################################
# The manifest carries diarized segments with VAD scores and transcripts, so
# the passthrough processors need no audio.

manifest = CorpusManifest.load(bundled_path("sample_manifest.json"))
print(len(manifest.entries), "sources,", sum(len(e.segments) for e in manifest.entries), "segments")

out_dir = tempfile.mkdtemp(prefix="stylerag-demo-")
config = AppConfig(db_dir=out_dir, dim=64)
report, index = build_database(config, manifest, out_dir)
print(report.to_dict()["counts"])
print("index:", index.mode.value, index.count, "records in", index.n_clusters, "clusters")

###############################################################################
# Rejections keep their reason.  Here they are segments whose VAD score did
# not clear the quality gate.

for rej in report.rejected[:3]:
    print(rej.reason.value, rej.detail)

###############################################################################
# Query every line of the sample script with the default K = 3.

db = StyleDatabase.open(out_dir)
retriever = db.retriever(config)
script = Script.load(bundled_path("sample_script.json"))
for pos, utt in enumerate(script.utterances[:4]):
    bundle = retriever.retrieve(StyleQuery.for_script(script, pos), db.retrieval_config(config), script)
    picks = ", ".join(f"{c.speaker_id}:{s:.2f}" for c, s in bundle.prompts)
    print(f"{pos} {utt.speaker_id:>8}: {picks}")

###############################################################################
# The ablation modes drop one part of the query vector.

query = StyleQuery.for_script(script, 2)
for mode in EmbeddingMode:
    bundle = retriever.retrieve(query, db.retrieval_config(config, embedding_mode=mode), script)
    print(f"{mode.value:>20}: {bundle.concatenation_manifest}")
