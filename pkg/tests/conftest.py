from __future__ import annotations

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from stylerag.core import KnowledgeRecord, SpeechClip, StyleEmbedding  # noqa: E402


def make_clip(clip_id: str, duration: float = 7.0, speaker: str = "spk", score: float = 0.9) -> SpeechClip:
    return SpeechClip(clip_id, f"mem://{clip_id}.wav", duration, speaker, "en", f"line {clip_id}", score)


def make_record(clip_id: str, vec, **kw) -> KnowledgeRecord:
    return KnowledgeRecord(make_clip(clip_id, **kw), StyleEmbedding(np.asarray(vec, dtype=np.float64)))


@pytest.fixture
def abc_records():
    return [make_record("a", [1, 0]), make_record("b", [0, 1]), make_record("c", [1, 1])]


@pytest.fixture(scope="session")
def corpus_db(tmp_path_factory):
    """The bundled 30-speaker corpus built into a database directory once per session."""
    from stylerag.app.config import AppConfig
    from stylerag.app.database import build_database
    from stylerag.ingestion import CorpusManifest
    from stylerag.synthetic import bundled_path

    out = str(tmp_path_factory.mktemp("corpus_db"))
    manifest = CorpusManifest.load(bundled_path("synthetic_manifest_30spk.json"))
    report, index = build_database(AppConfig(db_dir=out), manifest, out)
    return out, report, index


@pytest.fixture(scope="session")
def small_world():
    """Sample manifest ingested at dim 32 into a clustered index, plus the sample script."""
    from stylerag.core import Script
    from stylerag.embedders import EmbedderSet
    from stylerag.index import build_clustered
    from stylerag.ingestion import CorpusManifest, run_pipeline
    from stylerag.retrieval import RecordStore
    from stylerag.synthetic import bundled_path

    endpoints = EmbedderSet.reference(32, 0)
    report = run_pipeline(CorpusManifest.load(bundled_path("sample_manifest.json")), embedders=endpoints)
    index = build_clustered(report.accepted, 4, seed=0)
    script = Script.load(bundled_path("sample_script.json"))
    return index, RecordStore(report.accepted), endpoints, script


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
