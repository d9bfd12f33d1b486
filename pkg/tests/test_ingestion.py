import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stylerag.core import RejectReason
from stylerag.embedders import EmbedderSet
from stylerag.errors import EmptyInput, EmptyTranscript, OverlappingSegments, UnorderedInput
from stylerag.ingestion import (
    ChunkPolicy,
    CorpusManifest,
    ManifestEntry,
    ProcessorClients,
    RawSegment,
    ShortSegmentRule,
    chunk_segments,
    chunk_with_drops,
    clip_id_for,
    load_records,
    read_jsonl,
    run_pipeline,
    transcribe,
    write_report_files,
)

from streams import contract_violations, random_stream

SRC = "mem://src.wav"


def seg(a, b, spk="s1", vad=0.9, text="w " * 10, silences=()):
    return RawSegment(SRC, a, b, spk, vad, text.strip(), silences)


def test_seven_seconds_kept_whole():
    drafts = chunk_segments([seg(0, 7)])
    assert [d.spans for d in drafts] == [((0.0, 7.0),)]


def test_twenty_three_seconds_split_and_tail_dropped():
    kept, dropped = chunk_with_drops([seg(0, 23)])
    assert [d.spans for d in kept] == [((0.0, 10.0),), ((10.0, 20.0),)]
    assert [d.spans for d in dropped] == [((20.0, 23.0),)]


def test_long_segment_cut_at_latest_silence():
    kept = chunk_segments([seg(0, 20, silences=(4.0, 6.5, 8.2, 11.0))])
    assert [d.spans for d in kept] == [((0.0, 8.2),), ((8.2, 18.2),)]


def test_short_same_speaker_pair_merges():
    kept = chunk_segments([seg(0, 3), seg(3.5, 6.5)])
    assert len(kept) == 1
    assert kept[0].spans == ((0.0, 3.0), (3.5, 6.5))
    assert kept[0].duration_s == 6.0


@pytest.mark.parametrize(
    "segments",
    [
        [seg(0, 3, "s1"), seg(3.5, 6.5, "s2")],
        [seg(0, 3), seg(4.5, 7.5)],
    ],
    ids=["other-speaker", "gap-too-wide"],
)
def test_short_pieces_that_cannot_merge_are_dropped(segments):
    kept, dropped = chunk_with_drops(segments)
    assert kept == [] and len(dropped) == 2


def test_drop_rule():
    policy = ChunkPolicy(short_segment_rule=ShortSegmentRule.DROP)
    assert chunk_segments([seg(0, 3), seg(3.5, 6.5)], policy) == []


def test_unordered_and_overlapping():
    with pytest.raises(UnorderedInput):
        chunk_segments([seg(5, 11), seg(0, 4)])
    with pytest.raises(OverlappingSegments):
        chunk_segments([seg(0, 6), seg(5, 11)])


def test_clip_id_is_stable():
    assert clip_id_for(SRC, 0, 7) == clip_id_for(SRC, 0.0000001, 7.0)
    assert clip_id_for(SRC, 0, 7) != clip_id_for(SRC, 0, 7.5)
    assert len(clip_id_for(SRC, 0, 7)) == 20


def test_transcript_words_follow_cuts():
    words = " ".join(f"w{i}" for i in range(20))
    kept, dropped = chunk_with_drops([seg(0, 20, text=words)])
    got = [d.transcript for d in kept + dropped]
    assert " ".join(got).split() == words.split()
    assert got[0].split() == [f"w{i}" for i in range(10)]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_chunker_contract(seed):
    stream = random_stream(seed)
    kept, dropped = chunk_with_drops(stream)
    assert contract_violations(stream, kept, dropped) == []
    assert [d.clip_id for d in chunk_segments(stream)] == [d.clip_id for d in kept]


def _manifest(segments, **kw):
    return CorpusManifest((ManifestEntry(SRC, "en", ("demo",), tuple(segments)),), **kw)


def test_quality_gate_is_strict():
    report = run_pipeline(_manifest([seg(0, 7, vad=0.6), seg(8, 15, vad=0.61)]), embedders=EmbedderSet.reference(8))
    assert len(report.accepted) == 1
    assert [r.reason for r in report.rejected] == [RejectReason.QUALITY_BELOW_THRESHOLD]
    assert report.rejected[0].draft.spans == ((0.0, 7.0),)


def test_pipeline_records():
    report = run_pipeline(_manifest([seg(0, 7), seg(8, 26)]), embedders=EmbedderSet.reference(8))
    assert [r.clip.duration_s for r in report.accepted] == [7.0, 10.0, 8.0]
    assert all(r.embedding.dim == 8 and r.source_tags == frozenset({"demo"}) for r in report.accepted)
    assert all(r.embedding.components is not None for r in report.accepted)
    again = run_pipeline(_manifest([seg(0, 7), seg(8, 26)]), embedders=EmbedderSet.reference(8))
    assert [r.clip_id for r in again.accepted] == [r.clip_id for r in report.accepted]
    assert all(a.embedding == b.embedding for a, b in zip(again.accepted, report.accepted))


def test_empty_transcript_rejected():
    report = run_pipeline(_manifest([seg(0, 7, text="  ")]), embedders=EmbedderSet.reference(8))
    assert [r.reason for r in report.rejected] == [RejectReason.EMPTY_TRANSCRIPT]
    with pytest.raises(EmptyTranscript):
        transcribe(ProcessorClients(), report.rejected[0].draft)


def test_duplicate_entries_rejected_once():
    entry = ManifestEntry(SRC, "en", (), (seg(0, 7),))
    report = run_pipeline(CorpusManifest((entry, entry)), embedders=EmbedderSet.reference(8))
    assert len(report.accepted) == 1
    assert [r.reason for r in report.rejected] == [RejectReason.DUPLICATE_CLIP_ID]


def test_workers_do_not_change_output():
    entries = tuple(ManifestEntry(f"mem://{i}.wav", "en", (), tuple(
        RawSegment(f"mem://{i}.wav", s.start_s, s.end_s, s.speaker_id, s.vad_score, s.transcript, s.silences)
        for s in random_stream(i))) for i in range(6))
    manifest = CorpusManifest(entries)
    one = run_pipeline(manifest, embedders=EmbedderSet.reference(8))
    many = run_pipeline(manifest, embedders=EmbedderSet.reference(8), workers=4)
    assert one.to_dict() == many.to_dict()


def test_unreachable_asr_is_recorded_not_fatal():
    manifest = _manifest([seg(0, 7)], processors={"asr": "http://127.0.0.1:9"})
    report = run_pipeline(manifest, embedders=EmbedderSet.reference(8),
                          clients=ProcessorClients.from_manifest(manifest, timeout_ms=200))
    assert report.accepted == []
    assert [r.reason for r in report.rejected] == [RejectReason.ENDPOINT_UNAVAILABLE]
    assert report.errors and report.errors[0].code == "EndpointUnavailable"


def test_remote_processors_over_http():
    calls = []

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            calls.append(body["stage"])
            if body["stage"] == "diarize":
                out = {"segments": [{"start_s": 0, "end_s": 6, "speaker_id": "x", "vad_score": 0.9}]}
            elif body["stage"] == "asr":
                out = {"transcript": "hello from asr"}
            else:
                out = {"segments": body["params"]["segments"]}
            raw = json.dumps(out).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        manifest = CorpusManifest((ManifestEntry(SRC, "en"),),
                                  processors={"diarize": url, "vad": url, "asr": url})
        report = run_pipeline(manifest, embedders=EmbedderSet.reference(8))
    finally:
        server.shutdown()
        server.server_close()
    assert calls == ["diarize", "vad", "asr"]
    assert [(r.clip.speaker_id, r.clip.transcript) for r in report.accepted] == [("x", "hello from asr")]


def test_manifest_validation(tmp_path):
    with pytest.raises(EmptyInput):
        CorpusManifest(())
    with pytest.raises(ValueError):
        CorpusManifest((ManifestEntry(SRC),), processors={"asr": "ftp://nope"})
    manifest = _manifest([seg(0, 7, silences=(3.0,))])
    path = tmp_path / "m.json"
    manifest.save(path)
    assert CorpusManifest.load(path) == manifest


def test_report_files_and_schema(tmp_path):
    report = run_pipeline(_manifest([seg(0, 7), seg(8, 9, vad=0.1)]), embedders=EmbedderSet.reference(8))
    write_report_files(report, tmp_path)
    assert {p.name for p in tmp_path.iterdir()} == {"segments.jsonl", "clips.jsonl", "records.jsonl", "report.json"}
    for name, kind in [("segments", "segment"), ("clips", "clip"), ("records", "record")]:
        first = json.loads((tmp_path / f"{name}.jsonl").read_text().splitlines()[0])
        assert first["_schema"] == f"stylerag.{kind}/1"
        list(read_jsonl(tmp_path / f"{name}.jsonl", kind))
    with pytest.raises(ValueError):
        list(read_jsonl(tmp_path / "clips.jsonl", "record"))
    loaded = load_records(tmp_path / "records.jsonl")
    assert [r.clip for r in loaded] == [r.clip for r in report.accepted]
    summary = json.loads((tmp_path / "report.json").read_text())
    assert summary["counts"]["accepted"] == 1 and summary["counts"]["rejected"] == 1
