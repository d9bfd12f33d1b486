import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stylerag.errors import EmptyBundle, EmptyText, EndpointUnavailable
from stylerag.retrieval import StylePromptBundle
from stylerag.tts_adapter import (
    Element,
    ElementKind,
    HttpSynthesizer,
    MockSynthesizer,
    SynthesisRequest,
    construct_llm_sequence,
    parse_llm_sequence,
    reference_text_tokens,
    synthesize,
)

from conftest import make_clip


def test_small_example():
    seq = construct_llm_sequence([0.5, -0.5], [11, 12], [7])
    assert seq.kinds() == "SvttTxE"
    assert len(seq) == 7
    assert seq.to_dict() == {"I": 2, "K": 1, "speaker_vector": [0.5, -0.5], "text_tokens": [11, 12], "speech_tokens": [7]}


def test_no_speech_tokens():
    seq = construct_llm_sequence([1.0], [3], [])
    assert seq.kinds() == "SvtTE"
    assert parse_llm_sequence(seq.elements)[:2] == (1, 0)


def test_text_required():
    with pytest.raises(EmptyText):
        construct_llm_sequence([1.0], [], [1, 2])


@given(
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=8),
    st.lists(st.integers(0, 2**31), min_size=1, max_size=40),
    st.lists(st.integers(0, 4095), max_size=40),
)
def test_layout_and_round_trip(v, text, speech):
    seq = construct_llm_sequence(v, text, speech)
    i, k = len(text), len(speech)
    assert len(seq) == i + k + 4
    assert seq.elements[0].kind is ElementKind.START
    assert seq.elements[1].kind is ElementKind.SPEAKER
    assert seq.elements[i + 2].kind is ElementKind.TRANSITION
    assert seq.elements[-1].kind is ElementKind.END
    got_i, got_k, got_v = parse_llm_sequence(seq.elements)
    assert (got_i, got_k) == (i, k) and np.array_equal(got_v, np.asarray(v))


@pytest.mark.parametrize(
    "kinds",
    ["vtTxE", "SvtTx", "StvTE", "SvtTTxE", "SvxTtE", "SvTxE"],
)
def test_parse_rejects_malformed(kinds):
    elements = [Element(ElementKind(c), np.zeros(1) if c == "v" else 0) for c in kinds]
    with pytest.raises((ValueError, EmptyText)):
        parse_llm_sequence(elements)


def test_reference_tokens_stable():
    a = reference_text_tokens("hello brave world")
    assert a == reference_text_tokens("hello  brave world") and len(a) == 3
    assert all(0 <= t < 32_000 for t in a)


def _bundle(n=3):
    return StylePromptBundle(tuple((make_clip(f"s{i}"), 1.0 - i / 10) for i in range(n)))


def test_mock_synthesis_keeps_timbre_and_style_apart():
    req = SynthesisRequest("Hello there.", make_clip("timbre"), _bundle())
    wire = req.to_wire()
    assert wire["timbre_clip_uri"] == "mem://timbre.wav"
    assert wire["style_clip_uris"] == ["mem://s0.wav", "mem://s1.wav", "mem://s2.wav"]
    assert wire["style_manifest"] == ["s0", "s1", "s2"]
    result = synthesize(req, MockSynthesizer())
    assert result.descriptor["K_style_clips"] == 3
    assert result.audio_uri.startswith("mock://synth/")
    assert synthesize(req, MockSynthesizer()) == result


def test_request_validation():
    with pytest.raises(EmptyText):
        SynthesisRequest("", make_clip("t"), _bundle())
    with pytest.raises(EmptyBundle):
        SynthesisRequest("hi", make_clip("t"), StylePromptBundle(()))


def test_http_synthesizer_unreachable():
    req = SynthesisRequest("hi", make_clip("t"), _bundle(1))
    with pytest.raises(EndpointUnavailable):
        synthesize(req, HttpSynthesizer("http://127.0.0.1:9", timeout_ms=200))


def test_malformed_synthesizer_response():
    class Broken:
        def synthesize(self, body):
            return {"nope": 1}

    with pytest.raises(EndpointUnavailable):
        synthesize(SynthesisRequest("hi", make_clip("t"), _bundle(1)), Broken())
