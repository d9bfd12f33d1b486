"""Seeded synthetic corpora and scripts for offline runs.

The generated manifests carry inline diarized segments (speaker, VAD score,
transcript, pause markers) so the passthrough processors can ingest them.
They deliberately include the awkward cases: short turns that must be
merged, long monologues that must be split, and low-scoring segments that
the quality gate must reject.
"""

from __future__ import annotations

import importlib.resources
import json
from typing import Sequence

import numpy as np

from .core import Script, Utterance
from .ingestion import CorpusManifest, ManifestEntry, RawSegment

_WORDS = (
    "the a we you they it this that never always maybe really please "
    "night morning river city door road letter secret storm fire garden home "
    "laugh cry whisper shout wait run remember forget promise believe hope fear "
    "happy sad angry calm tired excited nervous gentle bitter proud lonely "
    "again together alone tomorrow yesterday now soon finally suddenly quietly"
).split()

SCENARIOS = ("story", "dialogue", "interview")
LANGUAGES = ("en", "zh")


def _sentence(rng: np.random.Generator, n_words: int) -> str:
    words = [_WORDS[i] for i in rng.integers(len(_WORDS), size=max(1, n_words))]
    return " ".join(words)


def make_synthetic_manifest(
    n_speakers: int = 30,
    n_sources: int = 60,
    segments_per_source: int = 40,
    seed: int = 7,
) -> CorpusManifest:
    """A corpus in which every source is a two-speaker exchange.

    Speakers are assigned round-robin so each of the ``n_speakers`` appears.
    """
    rng = np.random.default_rng(seed)
    entries = []
    for s in range(n_sources):
        a, b = (2 * s) % n_speakers, (2 * s + 1) % n_speakers
        speakers = (f"spk{a:02d}", f"spk{b:02d}")
        uri = f"synthetic://corpus/source_{s:03d}.wav"
        segs: list[RawSegment] = []
        t = round(float(rng.uniform(0.0, 1.0)), 3)
        turn = 0
        for _ in range(segments_per_source):
            spk = speakers[turn % 2]
            roll = rng.random()
            if roll < 0.08:
                # two short same-speaker bursts, merged by the chunker
                for _ in range(2):
                    d = round(float(rng.uniform(2.6, 4.4)), 3)
                    segs.append(RawSegment(uri, t, t + d, spk, round(float(rng.uniform(0.7, 0.99)), 3),
                                           _sentence(rng, int(d * 2.6))))
                    t = round(t + d + float(rng.uniform(0.1, 0.5)), 3)
            elif roll < 0.15:
                d = round(float(rng.uniform(12.0, 24.0)), 3)
                pauses = tuple(sorted(round(t + float(x), 3) for x in rng.uniform(3.0, d - 1.0, size=3)))
                segs.append(RawSegment(uri, t, t + d, spk, round(float(rng.uniform(0.7, 0.99)), 3),
                                       _sentence(rng, int(d * 2.6)), pauses))
                t = round(t + d, 3)
            else:
                d = round(float(rng.uniform(5.3, 9.7)), 3)
                low = roll > 0.95
                score = rng.uniform(0.2, 0.6) if low else rng.uniform(0.7, 0.99)
                segs.append(RawSegment(uri, t, t + d, spk, round(float(score), 3),
                                       _sentence(rng, int(d * 2.6))))
                t = round(t + d, 3)
            t = round(t + float(rng.uniform(0.2, 1.0)), 3)
            turn += 1 if rng.random() < 0.8 else 0
        entries.append(
            ManifestEntry(
                audio_uri=uri,
                language=LANGUAGES[s % len(LANGUAGES)],
                tags=("synthetic", SCENARIOS[s % len(SCENARIOS)]),
                segments=tuple(segs),
            )
        )
    return CorpusManifest(tuple(entries))


def make_synthetic_script(
    script_id: str = "demo-script",
    n_utterances: int = 12,
    speakers: Sequence[str] = ("narrator", "mira", "tomas"),
    seed: int = 0,
) -> Script:
    rng = np.random.default_rng(seed)
    utts = tuple(
        Utterance(speakers[int(rng.integers(len(speakers)))], _sentence(rng, int(rng.integers(6, 18))))
        for _ in range(n_utterances)
    )
    return Script(script_id, utts)


def bundled_path(name: str) -> str:
    """Filesystem path of a data file shipped with the package."""
    return str(importlib.resources.files("stylerag") / "data" / name)


def write_bundled_data() -> None:
    """Regenerate the files under ``stylerag/data`` (run from a source checkout)."""
    make_synthetic_manifest(n_speakers=4, n_sources=2, segments_per_source=8, seed=3).save(
        bundled_path("sample_manifest.json")
    )
    make_synthetic_manifest().save(bundled_path("synthetic_manifest_30spk.json"))
    with open(bundled_path("sample_script.json"), "w", encoding="utf-8") as fh:
        json.dump(make_synthetic_script().to_dict(), fh, indent=1)
