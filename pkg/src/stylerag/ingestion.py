"""Corpus ingestion: denoise, diarize, VAD, quality gate, chunk, ASR, embed.

Signal processing is delegated to external processor clients.  The default
``passthrough`` clients read everything they need from the manifest itself
(inline diarized segments with VAD scores and transcripts), which keeps the
whole pipeline runnable offline.

Per manifest entry the order is::

    denoise -> diarize -> vad -> quality gate -> chunk -> asr -> embed -> validate

ASR runs per chunk rather than per raw segment so that transcripts line up
with the clip boundaries that end up in the database.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Sequence

from .core import (
    CLIP_MAX_S,
    CLIP_MIN_S,
    KnowledgeRecord,
    RejectReason,
    Script,
    SpeechClip,
    Utterance,
    compose_style_embedding,
    validate_record,
)
from .embedders import (
    DEFAULT_WINDOW,
    EmbedderSet,
    ProfileCache,
    build_context_window,
    embed_emotion,
)
from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyTranscript,
    EndpointUnavailable,
    OverlappingSegments,
    StyleRagError,
    UnorderedInput,
)

MANIFEST_VERSION = 1
JSONL_SCHEMA = {
    "segment": "stylerag.segment/1",
    "clip": "stylerag.clip/1",
    "record": "stylerag.record/1",
}
PASSTHROUGH = "passthrough"
STAGES = ("denoise", "diarize", "vad", "asr")
_T = 6  # decimal places kept for all times


def _r(t: float) -> float:
    return round(float(t), _T)


@dataclass(frozen=True)
class RawSegment:
    source_uri: str
    start_s: float
    end_s: float
    speaker_id: str
    vad_score: float = 1.0
    transcript: str | None = None
    silences: tuple[float, ...] = ()  # absolute times of internal pauses

    def __post_init__(self) -> None:
        object.__setattr__(self, "start_s", _r(self.start_s))
        object.__setattr__(self, "end_s", _r(self.end_s))
        object.__setattr__(self, "silences", tuple(_r(s) for s in self.silences))
        if not self.end_s > self.start_s:
            raise ValueError(f"segment end {self.end_s} <= start {self.start_s}")

    @property
    def duration_s(self) -> float:
        return _r(self.end_s - self.start_s)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "source_uri": self.source_uri,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "speaker_id": self.speaker_id,
            "vad_score": self.vad_score,
        }
        if self.transcript is not None:
            d["transcript"] = self.transcript
        if self.silences:
            d["silences"] = list(self.silences)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any], source_uri: str | None = None) -> "RawSegment":
        return cls(
            source_uri=str(d.get("source_uri", source_uri or "")),
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            speaker_id=str(d.get("speaker_id", "spk0")),
            vad_score=float(d.get("vad_score", 1.0)),
            transcript=d.get("transcript"),
            silences=tuple(float(s) for s in d.get("silences", ())),
        )


class ShortSegmentRule(str, enum.Enum):
    MERGE_SAME_SPEAKER = "merge_same_speaker"
    DROP = "drop"


@dataclass(frozen=True)
class ChunkPolicy:
    min_s: float = CLIP_MIN_S
    max_s: float = CLIP_MAX_S
    short_segment_rule: ShortSegmentRule = ShortSegmentRule.MERGE_SAME_SPEAKER
    quality_threshold: float = 0.6
    # largest pause bridged when merging two short same-speaker segments
    max_merge_gap_s: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "short_segment_rule", ShortSegmentRule(self.short_segment_rule))
        if not 0 < self.min_s < self.max_s:
            raise ValueError("need 0 < min_s < max_s")
        if not 0.0 <= self.quality_threshold <= 1.0:
            raise ValueError("quality_threshold must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_s": self.min_s,
            "max_s": self.max_s,
            "short_segment_rule": self.short_segment_rule.value,
            "quality_threshold": self.quality_threshold,
            "max_merge_gap_s": self.max_merge_gap_s,
        }


@dataclass(frozen=True)
class ClipDraft:
    """A chunk before transcription and embedding."""

    source_uri: str
    speaker_id: str
    spans: tuple[tuple[float, float], ...]
    quality_score: float
    transcript: str = ""  # carried from the raw segments; what passthrough ASR echoes
    language: str = ""
    tags: tuple[str, ...] = ()

    @property
    def start_s(self) -> float:
        return self.spans[0][0]

    @property
    def end_s(self) -> float:
        return self.spans[-1][1]

    @property
    def duration_s(self) -> float:
        return _r(sum(_r(b - a) for a, b in self.spans))

    @property
    def clip_id(self) -> str:
        return clip_id_for(self.source_uri, self.start_s, self.end_s)

    @property
    def audio_uri(self) -> str:
        frag = ";".join(f"{a:g},{b:g}" for a, b in self.spans)
        return f"{self.source_uri}#t={frag}"

    def to_clip(self, transcript: str) -> SpeechClip:
        return SpeechClip(
            clip_id=self.clip_id,
            audio_uri=self.audio_uri,
            duration_s=self.duration_s,
            speaker_id=self.speaker_id,
            language=self.language,
            transcript=transcript,
            quality_score=self.quality_score,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "source_uri": self.source_uri,
            "speaker_id": self.speaker_id,
            "spans": [list(s) for s in self.spans],
            "duration_s": self.duration_s,
            "quality_score": self.quality_score,
            "transcript": self.transcript,
            "language": self.language,
        }


def clip_id_for(source_uri: str, start_s: float, end_s: float) -> str:
    key = f"{source_uri}\x1f{_r(start_s)!r}\x1f{_r(end_s)!r}".encode("utf-8")
    return hashlib.sha256(key).hexdigest()[:20]


def _split_words(text: str | None, start: float, end: float, cuts: list[float]) -> list[str]:
    """Distribute the words of ``text`` over the pieces delimited by ``cuts``."""
    bounds = [start, *cuts, end]
    pieces: list[list[str]] = [[] for _ in range(len(bounds) - 1)]
    words = (text or "").split()
    n = len(words)
    for j, w in enumerate(words):
        t = start + (j + 0.5) / n * (end - start)
        idx = 0
        while idx < len(pieces) - 1 and t >= bounds[idx + 1]:
            idx += 1
        pieces[idx].append(w)
    return [" ".join(p) for p in pieces]


def _split_long(seg: RawSegment, policy: ChunkPolicy) -> list[tuple[float, float, str]]:
    """Cut a segment into pieces no longer than ``max_s``.

    A cut goes at the latest silence marker in ``[cur + min_s, cur + max_s]``,
    or at exactly ``cur + max_s`` when no marker falls in that range.  Only
    the final piece may be shorter than ``min_s``.
    """
    cuts: list[float] = []
    cur = seg.start_s
    while _r(seg.end_s - cur) > policy.max_s:
        lo, hi = _r(cur + policy.min_s), _r(cur + policy.max_s)
        inside = [s for s in seg.silences if lo <= s <= hi]
        cut = max(inside) if inside else hi
        cuts.append(cut)
        cur = cut
    texts = _split_words(seg.transcript, seg.start_s, seg.end_s, cuts)
    bounds = [seg.start_s, *cuts, seg.end_s]
    return [(bounds[i], bounds[i + 1], texts[i]) for i in range(len(texts))]


def _check_order(segments: Sequence[RawSegment]) -> None:
    for prev, cur in zip(segments, segments[1:]):
        if cur.start_s < prev.start_s:
            raise UnorderedInput(f"segment at {cur.start_s} s follows one at {prev.start_s} s")
        if cur.start_s < prev.end_s:
            raise OverlappingSegments(f"segment at {cur.start_s} s overlaps one ending at {prev.end_s} s")


def chunk_with_drops(
    segments: Sequence[RawSegment],
    policy: ChunkPolicy = ChunkPolicy(),
    *,
    language: str = "",
    tags: Sequence[str] = (),
) -> tuple[list[ClipDraft], list[ClipDraft]]:
    """Like :func:`chunk_segments` but also return the pieces that were dropped."""
    segments = list(segments)
    _check_order(segments)
    tags = tuple(tags)
    kept: list[ClipDraft] = []
    dropped: list[ClipDraft] = []
    pending: ClipDraft | None = None

    def flush() -> None:
        nonlocal pending
        if pending is not None:
            dropped.append(pending)
            pending = None

    for seg in segments:
        for a, b, text in _split_long(seg, policy):
            piece = ClipDraft(seg.source_uri, seg.speaker_id, ((a, b),), seg.vad_score, text, language, tags)
            if piece.duration_s >= policy.min_s:
                flush()
                kept.append(piece)
                continue
            if policy.short_segment_rule is ShortSegmentRule.DROP:
                dropped.append(piece)
                continue
            if (
                pending is not None
                and pending.speaker_id == piece.speaker_id
                and _r(piece.start_s - pending.end_s) <= policy.max_merge_gap_s
                and _r(pending.duration_s + piece.duration_s) <= policy.max_s
            ):
                pending = replace(
                    pending,
                    spans=pending.spans + piece.spans,
                    quality_score=min(pending.quality_score, piece.quality_score),
                    transcript=" ".join(t for t in (pending.transcript, piece.transcript) if t),
                )
            else:
                flush()
                pending = piece
            if pending.duration_s >= policy.min_s:
                kept.append(pending)
                pending = None
    flush()
    return kept, dropped


def chunk_segments(
    segments: Sequence[RawSegment],
    policy: ChunkPolicy = ChunkPolicy(),
    *,
    language: str = "",
    tags: Sequence[str] = (),
) -> list[ClipDraft]:
    """Turn one source's ordered segments into clip drafts of ``min_s``..``max_s`` seconds.

    Raises:
        UnorderedInput: segments not sorted by start time.
        OverlappingSegments: a segment starts before the previous one ends.
    """
    return chunk_with_drops(segments, policy, language=language, tags=tags)[0]


# -- manifest --------------------------------------------------------------


def _valid_locator(loc: str) -> bool:
    return loc == PASSTHROUGH or loc.startswith(("http://", "https://"))


@dataclass(frozen=True)
class ManifestEntry:
    audio_uri: str
    language: str = ""
    tags: tuple[str, ...] = ()
    segments: tuple[RawSegment, ...] | None = None
    duration_s: float | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"audio_uri": self.audio_uri, "language": self.language}
        if self.tags:
            d["tags"] = list(self.tags)
        if self.duration_s is not None:
            d["duration_s"] = self.duration_s
        if self.segments is not None:
            d["segments"] = [
                {k: v for k, v in s.to_dict().items() if k != "source_uri"} for s in self.segments
            ]
        return d


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    processors: dict[str, str] = field(default_factory=lambda: {s: PASSTHROUGH for s in STAGES})
    version: int = MANIFEST_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        procs = {s: PASSTHROUGH for s in STAGES}
        procs.update(self.processors or {})
        object.__setattr__(self, "processors", procs)
        if not self.entries:
            raise EmptyInput("manifest has no entries")
        for stage, loc in procs.items():
            if stage not in STAGES:
                raise ValueError(f"unknown processor stage {stage!r}")
            if not _valid_locator(loc):
                raise ValueError(f"invalid locator for {stage}: {loc!r}")
        for e in self.entries:
            if not e.audio_uri:
                raise ValueError("manifest entry without audio_uri")

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "processors": dict(self.processors),
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CorpusManifest":
        version = int(d.get("version", MANIFEST_VERSION))
        if version > MANIFEST_VERSION:
            raise ValueError(f"manifest version {version} not supported")
        entries = []
        for e in d.get("entries", []):
            uri = str(e.get("audio_uri", ""))
            segs = e.get("segments")
            entries.append(
                ManifestEntry(
                    audio_uri=uri,
                    language=str(e.get("language", "")),
                    tags=tuple(e.get("tags", ())),
                    segments=None if segs is None else tuple(RawSegment.from_dict(s, uri) for s in segs),
                    duration_s=e.get("duration_s"),
                )
            )
        return cls(tuple(entries), d.get("processors") or {}, version)

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "CorpusManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | os.PathLike[str]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)


# -- processor clients -------------------------------------------------------


@dataclass(frozen=True)
class ProcessorClients:
    """One locator per stage: ``"passthrough"`` or an HTTP base URL."""

    denoise: str = PASSTHROUGH
    diarize: str = PASSTHROUGH
    vad: str = PASSTHROUGH
    asr: str = PASSTHROUGH
    timeout_ms: int = 10_000

    @classmethod
    def from_manifest(cls, manifest: CorpusManifest, timeout_ms: int = 10_000) -> "ProcessorClients":
        return cls(**{s: manifest.processors[s] for s in STAGES}, timeout_ms=timeout_ms)

    def _remote(self, stage: str, audio_uri: str, params: dict[str, Any]) -> dict[str, Any]:
        from .embedders import _post_json

        body = {"stage": stage, "audio_uri": audio_uri, "params": params}
        return _post_json(getattr(self, stage), "/process", body, self.timeout_ms)

    def run_denoise(self, entry: ManifestEntry) -> str:
        if self.denoise == PASSTHROUGH:
            return entry.audio_uri
        return str(self._remote("denoise", entry.audio_uri, {})["audio_uri"])

    def run_diarize(self, entry: ManifestEntry, audio_uri: str) -> list[RawSegment]:
        if self.diarize == PASSTHROUGH:
            if entry.segments is not None:
                return [replace(s, source_uri=audio_uri) for s in entry.segments]
            if entry.duration_s:
                return [RawSegment(audio_uri, 0.0, float(entry.duration_s), "spk0")]
            raise EmptyInput(f"{entry.audio_uri}: passthrough diarization needs inline segments or duration_s")
        resp = self._remote("diarize", audio_uri, {})
        return [RawSegment.from_dict(s, audio_uri) for s in resp["segments"]]

    def run_vad(self, audio_uri: str, segments: list[RawSegment]) -> list[RawSegment]:
        if self.vad == PASSTHROUGH:
            return segments
        params = {"segments": [s.to_dict() for s in segments]}
        resp = self._remote("vad", audio_uri, params)
        return [RawSegment.from_dict(s, audio_uri) for s in resp["segments"]]

    def run_asr(self, draft: ClipDraft) -> str:
        if self.asr == PASSTHROUGH:
            return draft.transcript
        params = {"spans": [list(s) for s in draft.spans], "language": draft.language}
        return str(self._remote("asr", draft.source_uri, params).get("transcript", ""))


def transcribe(client: ProcessorClients, draft: ClipDraft) -> str:
    """Transcript for one draft.

    Raises:
        EmptyTranscript: the recognizer returned nothing but whitespace.
        EndpointUnavailable: the ASR client failed.
    """
    text = client.run_asr(draft).strip()
    if not text:
        raise EmptyTranscript(f"no transcript for {draft.clip_id}")
    return text


# -- pipeline ----------------------------------------------------------------


@dataclass(frozen=True)
class RejectedDraft:
    draft: ClipDraft
    reason: RejectReason
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"reason": self.reason.value, "detail": self.detail, "draft": self.draft.to_dict()}


@dataclass(frozen=True)
class EntryError:
    audio_uri: str
    code: str
    message: str


@dataclass
class IngestionReport:
    accepted: list[KnowledgeRecord] = field(default_factory=list)
    rejected: list[RejectedDraft] = field(default_factory=list)
    errors: list[EntryError] = field(default_factory=list)
    segments: list[RawSegment] = field(default_factory=list)  # post-VAD
    dropped: list[ClipDraft] = field(default_factory=list)
    policy: ChunkPolicy = field(default_factory=ChunkPolicy)
    db_dim: int = 0

    @property
    def total_drafts(self) -> int:
        return len(self.accepted) + len(self.rejected)

    def to_dict(self) -> dict[str, Any]:
        speakers = sorted({r.clip.speaker_id for r in self.accepted})
        return {
            "version": 1,
            "db_dim": self.db_dim,
            "policy": self.policy.to_dict(),
            "counts": {
                "accepted": len(self.accepted),
                "rejected": len(self.rejected),
                "drafts": self.total_drafts,
                "dropped_pieces": len(self.dropped),
                "entry_errors": len(self.errors),
                "speakers": len(speakers),
            },
            "durations_s": {
                "post_vad": _r(sum(s.duration_s for s in self.segments)),
                "accepted": _r(sum(r.clip.duration_s for r in self.accepted)),
                "dropped": _r(sum(d.duration_s for d in self.dropped)),
            },
            "rejected": [r.to_dict() for r in self.rejected],
            "errors": [e.__dict__ for e in self.errors],
        }


@dataclass
class _EntryResult:
    accepted: list[tuple[ClipDraft, KnowledgeRecord]] = field(default_factory=list)
    rejected: list[RejectedDraft] = field(default_factory=list)
    errors: list[EntryError] = field(default_factory=list)
    segments: list[RawSegment] = field(default_factory=list)
    dropped: list[ClipDraft] = field(default_factory=list)


def _segment_draft(seg: RawSegment, entry: ManifestEntry) -> ClipDraft:
    return ClipDraft(
        seg.source_uri, seg.speaker_id, ((seg.start_s, seg.end_s),), seg.vad_score,
        seg.transcript or "", entry.language, tuple(entry.tags),
    )


def corpus_emotion_text(transcript: str, profile_text: str) -> str:
    # same template the query side uses when no user preference is given
    from .retrieval import rewrite_text

    return rewrite_text(transcript, profile_text, None)


def _process_entry(
    entry: ManifestEntry,
    policy: ChunkPolicy,
    clients: ProcessorClients,
    embedders: EmbedderSet,
    db_dim: int,
    window: int,
) -> _EntryResult:
    out = _EntryResult()
    try:
        uri = clients.run_denoise(entry)
        segments = clients.run_vad(uri, clients.run_diarize(entry, uri))
        _check_order(segments)
    except StyleRagError as exc:
        out.errors.append(EntryError(entry.audio_uri, exc.code, str(exc)))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        out.errors.append(EntryError(entry.audio_uri, "MalformedProcessorOutput", str(exc)))
        return out
    out.segments = list(segments)

    passing = []
    for seg in segments:
        if seg.vad_score > policy.quality_threshold:
            passing.append(seg)
        else:
            out.rejected.append(
                RejectedDraft(
                    _segment_draft(seg, entry), RejectReason.QUALITY_BELOW_THRESHOLD,
                    f"vad_score {seg.vad_score} <= {policy.quality_threshold}",
                )
            )
    drafts, out.dropped = chunk_with_drops(passing, policy, language=entry.language, tags=entry.tags)

    transcribed: list[tuple[ClipDraft, str]] = []
    for d in drafts:
        try:
            transcribed.append((d, transcribe(clients, d)))
        except EmptyTranscript as exc:
            out.rejected.append(RejectedDraft(d, RejectReason.EMPTY_TRANSCRIPT, str(exc)))
        except EndpointUnavailable as exc:
            out.rejected.append(RejectedDraft(d, RejectReason.ENDPOINT_UNAVAILABLE, str(exc)))
            out.errors.append(EntryError(entry.audio_uri, exc.code, str(exc)))

    if not transcribed:
        return out
    # the source as a script: one utterance per transcribed clip, in order
    script = Script(uri, tuple(Utterance(d.speaker_id, t) for d, t in transcribed))
    cache = ProfileCache()
    zero_user = [0.0] * db_dim
    for i, (d, text) in enumerate(transcribed):
        try:
            profile, pvec = cache.get(script, d.speaker_id, embedders.profile)
            ctx = build_context_window(script, i, window)
            evec = embed_emotion(embedders.emotion, corpus_emotion_text(text, profile.profile_text), profile, ctx)
            if pvec.shape[0] != db_dim:
                raise DimensionMismatch(f"embedder dim {pvec.shape[0]} != database dim {db_dim}")
            emb = compose_style_embedding(pvec, evec, zero_user)
        except EndpointUnavailable as exc:
            out.rejected.append(RejectedDraft(d, RejectReason.ENDPOINT_UNAVAILABLE, str(exc)))
            out.errors.append(EntryError(entry.audio_uri, exc.code, str(exc)))
            continue
        except DimensionMismatch as exc:
            out.rejected.append(RejectedDraft(d, RejectReason.DIMENSION_MISMATCH, str(exc)))
            continue
        record = KnowledgeRecord(d.to_clip(text), emb, frozenset(entry.tags))
        verdict = validate_record(record, db_dim, policy.quality_threshold, min_s=policy.min_s, max_s=policy.max_s)
        if verdict is None:
            out.accepted.append((d, record))
        else:
            out.rejected.append(RejectedDraft(d, verdict.reason, verdict.detail))
    return out


def run_pipeline(
    manifest: CorpusManifest,
    policy: ChunkPolicy = ChunkPolicy(),
    embedders: EmbedderSet | None = None,
    db_dim: int | None = None,
    *,
    clients: ProcessorClients | None = None,
    window: int = DEFAULT_WINDOW,
    workers: int = 1,
) -> IngestionReport:
    """Ingest every manifest entry into knowledge records.

    Entry failures are recorded in ``report.errors`` and do not stop the run.
    The report lists entries in manifest order whatever ``workers`` is.
    """
    if embedders is None:
        embedders = EmbedderSet.reference(db_dim or 256)
    db_dim = db_dim if db_dim is not None else embedders.dim
    if embedders.dim != db_dim:
        raise DimensionMismatch(f"embedders emit {embedders.dim}, database wants {db_dim}")
    clients = clients or ProcessorClients.from_manifest(manifest)

    def work(e: ManifestEntry) -> _EntryResult:
        return _process_entry(e, policy, clients, embedders, db_dim, window)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, manifest.entries))
    else:
        results = [work(e) for e in manifest.entries]

    report = IngestionReport(policy=policy, db_dim=db_dim)
    seen: set[str] = set()
    for res in results:
        for draft, rec in res.accepted:
            # identical (source, start, end) listed twice in the manifest
            if rec.clip_id in seen:
                report.rejected.append(RejectedDraft(draft, RejectReason.DUPLICATE_CLIP_ID, rec.clip_id))
                continue
            seen.add(rec.clip_id)
            report.accepted.append(rec)
        report.rejected.extend(res.rejected)
        report.errors.extend(res.errors)
        report.segments.extend(res.segments)
        report.dropped.extend(res.dropped)
    return report


# -- JSON-lines stores -------------------------------------------------------


def write_jsonl(path: str | os.PathLike[str], kind: str, rows: Iterable[dict[str, Any]]) -> int:
    schema = JSONL_SCHEMA[kind]
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps({"_schema": schema, **row}, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | os.PathLike[str], kind: str | None = None) -> Iterator[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            schema = row.pop("_schema", None)
            if kind is not None and schema != JSONL_SCHEMA[kind]:
                raise ValueError(f"{path}:{lineno}: expected schema {JSONL_SCHEMA[kind]}, got {schema}")
            yield row


def save_records(path: str | os.PathLike[str], records: Iterable[KnowledgeRecord]) -> int:
    return write_jsonl(path, "record", (r.to_dict() for r in records))


def load_records(path: str | os.PathLike[str]) -> list[KnowledgeRecord]:
    return [KnowledgeRecord.from_dict(row) for row in read_jsonl(path, "record")]


def write_report_files(report: IngestionReport, out_dir: str | os.PathLike[str]) -> None:
    """Write segments.jsonl, clips.jsonl, records.jsonl and report.json."""
    os.makedirs(out_dir, exist_ok=True)
    write_jsonl(os.path.join(out_dir, "segments.jsonl"), "segment", (s.to_dict() for s in report.segments))
    write_jsonl(os.path.join(out_dir, "clips.jsonl"), "clip", (r.clip.to_dict() for r in report.accepted))
    save_records(os.path.join(out_dir, "records.jsonl"), report.accepted)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1)
