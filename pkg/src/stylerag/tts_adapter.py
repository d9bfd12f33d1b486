"""Hand-off to a style/timbre-decoupled synthesizer.

The synthesizer's language-model stage consumes::

    [S, v, t_1 .. t_I, T, x_1 .. x_K, E]

where ``v`` is the speaker (timbre) vector, ``t`` are text tokens of the
sentence to speak and ``x`` are speech tokens carrying style.  This module
builds and parses that sequence and forwards synthesis requests to an
external synthesizer.  Tokenizers and the speaker encoder are opaque: tokens
are plain integers and ``v`` is whatever vector the caller supplies.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np

from .core import SpeechClip
from .embedders import _post_json
from .errors import EmptyBundle, EmptyText, EndpointUnavailable
from .retrieval import StylePromptBundle


class ElementKind(str, enum.Enum):
    START = "S"
    SPEAKER = "v"
    TEXT = "t"
    TRANSITION = "T"
    SPEECH = "x"
    END = "E"


@dataclass(frozen=True, eq=False)
class Element:
    kind: ElementKind
    value: Any = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Element) or other.kind is not self.kind:
            return False
        if self.kind is ElementKind.SPEAKER:
            return np.array_equal(self.value, other.value)
        return self.value == other.value

    def __repr__(self) -> str:
        if self.kind is ElementKind.SPEAKER:
            return "v"
        if self.kind in (ElementKind.TEXT, ElementKind.SPEECH):
            return f"{self.kind.value}({self.value})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class LlmInputSequence:
    elements: tuple[Element, ...]
    n_text: int
    n_speech: int

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def speaker_vector(self) -> np.ndarray:
        return self.elements[1].value

    @property
    def transition_index(self) -> int:
        return self.n_text + 2

    def kinds(self) -> str:
        return "".join(e.kind.value for e in self.elements)

    def to_dict(self) -> dict[str, Any]:
        return {
            "I": self.n_text,
            "K": self.n_speech,
            "speaker_vector": [float(x) for x in self.speaker_vector],
            "text_tokens": [e.value for e in self.elements[2:self.transition_index]],
            "speech_tokens": [e.value for e in self.elements[self.transition_index + 1:-1]],
        }


def construct_llm_sequence(
    v: Sequence[float] | np.ndarray, text_tokens: Sequence[int], speech_tokens: Sequence[int]
) -> LlmInputSequence:
    """Lay out ``[S, v, t.., T, x.., E]``; length is ``I + K + 4``.

    ``speech_tokens`` may be empty.  Raises :class:`EmptyText` when there are
    no text tokens.
    """
    if len(text_tokens) == 0:
        raise EmptyText("at least one text token is required")
    vec = np.array(v, dtype=np.float64)
    vec.setflags(write=False)
    elements = (
        Element(ElementKind.START),
        Element(ElementKind.SPEAKER, vec),
        *(Element(ElementKind.TEXT, int(t)) for t in text_tokens),
        Element(ElementKind.TRANSITION),
        *(Element(ElementKind.SPEECH, int(x)) for x in speech_tokens),
        Element(ElementKind.END),
    )
    return LlmInputSequence(elements, len(text_tokens), len(speech_tokens))


def parse_llm_sequence(elements: Sequence[Element]) -> tuple[int, int, np.ndarray]:
    """Recover ``(I, K, v)`` from a laid-out sequence, validating its shape."""
    kinds = [e.kind for e in elements]
    if len(kinds) < 5 or kinds[0] is not ElementKind.START or kinds[-1] is not ElementKind.END:
        raise ValueError("sequence must start with S and end with E")
    if kinds[1] is not ElementKind.SPEAKER:
        raise ValueError("second element must be the speaker vector")
    if kinds.count(ElementKind.TRANSITION) != 1:
        raise ValueError("sequence needs exactly one transition marker")
    t_at = kinds.index(ElementKind.TRANSITION)
    if any(k is not ElementKind.TEXT for k in kinds[2:t_at]):
        raise ValueError("only text tokens may sit between v and T")
    if any(k is not ElementKind.SPEECH for k in kinds[t_at + 1:-1]):
        raise ValueError("only speech tokens may sit between T and E")
    n_text = t_at - 2
    if n_text < 1:
        raise EmptyText("no text tokens")
    return n_text, len(kinds) - t_at - 2, np.asarray(elements[1].value)


def reference_text_tokens(text: str, vocab_size: int = 32_000) -> list[int]:
    """Stable whitespace tokenization to integer ids, for offline use."""
    return [
        int.from_bytes(hashlib.blake2b(w.encode("utf-8"), digest_size=8).digest(), "little") % vocab_size
        for w in text.split()
    ]


@dataclass(frozen=True)
class SynthesisRequest:
    text: str
    timbre_prompt: SpeechClip
    style_bundle: StylePromptBundle

    def __post_init__(self) -> None:
        if not self.text:
            raise EmptyText("synthesis text must be non-empty")
        if len(self.style_bundle) == 0:
            raise EmptyBundle("style bundle must hold at least one clip")

    def to_wire(self) -> dict[str, Any]:
        """Body for ``POST /synthesize``; timbre and style travel in separate fields."""
        return {
            "text": self.text,
            "timbre_clip_uri": self.timbre_prompt.audio_uri,
            "style_clip_uris": [clip.audio_uri for clip, _ in self.style_bundle.prompts],
            "style_manifest": self.style_bundle.concatenation_manifest,
        }


@dataclass(frozen=True)
class SynthesisResult:
    audio_uri: str
    descriptor: dict[str, Any]


class Synthesizer(Protocol):
    def synthesize(self, body: dict[str, Any]) -> dict[str, Any]: ...


class MockSynthesizer:
    """Echoes what it received plus a deterministic placeholder locator."""

    def synthesize(self, body: dict[str, Any]) -> dict[str, Any]:
        digest = hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()[:16]
        return {
            "audio_uri": f"mock://synth/{digest}.wav",
            "descriptor": {
                "text": body["text"],
                "timbre_clip_uri": body["timbre_clip_uri"],
                "style_clip_uris": list(body["style_clip_uris"]),
                "style_manifest": list(body.get("style_manifest", [])),
                "K_style_clips": len(body["style_clip_uris"]),
            },
        }


@dataclass(frozen=True)
class HttpSynthesizer:
    address: str
    timeout_ms: int = 30_000

    def synthesize(self, body: dict[str, Any]) -> dict[str, Any]:
        return _post_json(self.address, "/synthesize", body, self.timeout_ms)


def synthesize(request: SynthesisRequest, endpoint: Synthesizer) -> SynthesisResult:
    resp = endpoint.synthesize(request.to_wire())
    try:
        return SynthesisResult(str(resp["audio_uri"]), dict(resp["descriptor"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise EndpointUnavailable(f"malformed synthesizer response: {exc}") from exc
