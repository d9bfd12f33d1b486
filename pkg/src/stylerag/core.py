"""Shared domain types and the style-embedding arithmetic.

A style embedding is the plain sum of three component vectors (character
profile, situational emotion, user preference).  No weighting and no
normalization is applied; retrieval ranks by raw inner product.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidQuery, NonFiniteInput

DEFAULT_DIM = 256
DEFAULT_K = 3
CLIP_MIN_S = 5.0
CLIP_MAX_S = 10.0


def as_vector(values: Any, *, name: str = "vector") -> np.ndarray:
    """Coerce to a finite, 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StyleEmbedding:
    """Dense style vector, optionally carrying its three additive parts.

    ``values`` is float64.  When ``components`` is present it holds the
    ``(profile, emotion, user)`` vectors that were summed, left to right,
    to produce ``values``.
    """

    values: np.ndarray
    components: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __post_init__(self) -> None:
        values = as_vector(self.values, name="values")
        if values.size < 1:
            raise DimensionMismatch("embedding dim must be >= 1")
        object.__setattr__(self, "values", _frozen(values))
        if self.components is not None:
            parts = tuple(as_vector(c, name="component") for c in self.components)
            if len(parts) != 3 or any(p.shape != values.shape for p in parts):
                raise DimensionMismatch("components must be three vectors of length dim")
            object.__setattr__(self, "components", tuple(_frozen(p) for p in parts))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StyleEmbedding):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SpeechClip:
    clip_id: str
    audio_uri: str
    duration_s: float
    speaker_id: str
    language: str
    transcript: str
    quality_score: float

    def __post_init__(self) -> None:
        if not (self.duration_s > 0):
            raise ValueError(f"duration_s must be > 0, got {self.duration_s}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "audio_uri": self.audio_uri,
            "duration_s": self.duration_s,
            "speaker_id": self.speaker_id,
            "language": self.language,
            "transcript": self.transcript,
            "quality_score": self.quality_score,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SpeechClip":
        return cls(
            clip_id=str(d["clip_id"]),
            audio_uri=str(d["audio_uri"]),
            duration_s=float(d["duration_s"]),
            speaker_id=str(d["speaker_id"]),
            language=str(d.get("language", "")),
            transcript=str(d.get("transcript", "")),
            quality_score=float(d.get("quality_score", 1.0)),
        )


@dataclass(frozen=True, eq=False)
class KnowledgeRecord:
    clip: SpeechClip
    embedding: StyleEmbedding
    source_tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_tags", frozenset(self.source_tags))

    @property
    def clip_id(self) -> str:
        return self.clip.clip_id

    def to_dict(self) -> dict[str, Any]:
        # stored as 32-bit reals; float() of a float32 prints its shortest exact repr
        vec = self.embedding.values.astype(np.float32)
        return {
            "clip": self.clip.to_dict(),
            "embedding": [float(x) for x in vec],
            "source_tags": sorted(self.source_tags),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KnowledgeRecord":
        vec = np.asarray(d["embedding"], dtype=np.float32).astype(np.float64)
        return cls(
            clip=SpeechClip.from_dict(d["clip"]),
            embedding=StyleEmbedding(vec),
            source_tags=frozenset(d.get("source_tags", ())),
        )


class AgeBand(str, enum.Enum):
    CHILD = "child"
    TEEN = "teen"
    YOUNG_ADULT = "young_adult"
    ADULT = "adult"
    SENIOR = "senior"


class Gender(str, enum.Enum):
    FEMALE = "female"
    MALE = "male"
    NONBINARY = "nonbinary"


@dataclass(frozen=True)
class UserPreference:
    """Listener-side style preference.  Every field may be absent."""

    age_band: AgeBand | None = None
    gender: Gender | None = None
    region: str | None = None
    free_text: str | None = None

    def __post_init__(self) -> None:
        if self.age_band is not None:
            object.__setattr__(self, "age_band", AgeBand(self.age_band))
        if self.gender is not None:
            object.__setattr__(self, "gender", Gender(self.gender))

    @property
    def is_empty(self) -> bool:
        return all(
            v is None or v == ""
            for v in (self.age_band, self.gender, self.region, self.free_text)
        )

    def fields(self) -> list[tuple[str, str]]:
        """Present fields as ``(name, value)`` pairs in canonical order."""
        out = []
        for name in ("age_band", "gender", "region", "free_text"):
            v = getattr(self, name)
            if v is None or v == "":
                continue
            out.append((name, v.value if isinstance(v, enum.Enum) else str(v)))
        return out

    def to_dict(self) -> dict[str, str]:
        return dict(self.fields())

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None) -> "UserPreference":
        d = d or {}
        return cls(
            age_band=d.get("age_band") or None,
            gender=d.get("gender") or None,
            region=d.get("region") or None,
            free_text=d.get("free_text") or None,
        )


@dataclass(frozen=True)
class Utterance:
    speaker_id: str
    text: str


@dataclass(frozen=True)
class Script:
    """An ordered dialogue or narration, addressed by ``script_id``."""

    script_id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "utterances", tuple(self.utterances))

    def __len__(self) -> int:
        return len(self.utterances)

    @property
    def full_text(self) -> str:
        return "\n".join(f"{u.speaker_id}: {u.text}" for u in self.utterances)

    def speaker_lines(self, speaker_id: str) -> list[str]:
        return [u.text for u in self.utterances if u.speaker_id == speaker_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "script_id": self.script_id,
            "utterances": [{"speaker_id": u.speaker_id, "text": u.text} for u in self.utterances],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Script":
        utts = tuple(
            Utterance(str(u.get("speaker_id", u.get("speaker", ""))), str(u["text"]))
            for u in d["utterances"]
        )
        return cls(str(d["script_id"]), utts)

    @classmethod
    def load(cls, path: str) -> "Script":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class StyleQuery:
    utterance_text: str
    script_id: str
    position: int
    user_pref: UserPreference | None = None
    explicit_style_clip: SpeechClip | None = None
    k: int = DEFAULT_K

    def __post_init__(self) -> None:
        if not self.utterance_text:
            raise InvalidQuery("utterance_text must be non-empty")
        if self.position < 0:
            raise InvalidQuery("position must be >= 0")
        if self.k < 1:
            raise InvalidQuery("k must be >= 1")

    @classmethod
    def for_script(cls, script: Script, position: int, **kwargs: Any) -> "StyleQuery":
        from .errors import PositionOutOfRange

        if not 0 <= position < len(script):
            raise PositionOutOfRange(f"position {position} outside script of length {len(script)}")
        return cls(script.utterances[position].text, script.script_id, position, **kwargs)


def compose_style_embedding(
    profile: Sequence[float] | np.ndarray,
    emotion: Sequence[float] | np.ndarray,
    user: Sequence[float] | np.ndarray,
) -> StyleEmbedding:
    """Sum the profile, emotion and user vectors into one style embedding.

    Raises:
        DimensionMismatch: if the three lengths differ or are zero.
        NonFiniteInput: if any entry is NaN or Inf.
    """
    p = as_vector(profile, name="profile")
    e = as_vector(emotion, name="emotion")
    u = as_vector(user, name="user")
    if not (p.shape == e.shape == u.shape):
        raise DimensionMismatch(f"component lengths differ: {p.size}, {e.size}, {u.size}")
    if p.size < 1:
        raise DimensionMismatch("components must have length >= 1")
    return StyleEmbedding((p + e) + u, components=(p, e, u))


def inner_product(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Float64 dot product, summed in ascending index order."""
    x = as_vector(a, name="a")
    y = as_vector(b, name="b")
    if x.shape != y.shape:
        raise DimensionMismatch(f"lengths differ: {x.size} vs {y.size}")
    total = 0.0
    for xi, yi in zip(x.tolist(), y.tolist()):
        total += xi * yi
    return total


class RejectReason(str, enum.Enum):
    DURATION_OUT_OF_RANGE = "DurationOutOfRange"
    QUALITY_BELOW_THRESHOLD = "QualityBelowThreshold"
    DIMENSION_MISMATCH = "DimensionMismatch"
    EMPTY_CLIP_ID = "EmptyClipId"
    EMPTY_TRANSCRIPT = "EmptyTranscript"
    ENDPOINT_UNAVAILABLE = "EndpointUnavailable"
    DUPLICATE_CLIP_ID = "DuplicateClipId"


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    detail: str = ""


def validate_record(
    record: KnowledgeRecord,
    db_dim: int,
    quality_threshold: float,
    *,
    min_s: float = CLIP_MIN_S,
    max_s: float = CLIP_MAX_S,
) -> Rejection | None:
    """Check database admission rules.

    Returns ``None`` when the record is admissible, otherwise the first
    failing rule.  The quality comparison is strict: a score equal to the
    threshold is rejected.
    """
    clip = record.clip
    if not clip.clip_id:
        return Rejection(RejectReason.EMPTY_CLIP_ID)
    if not (min_s <= clip.duration_s <= max_s):
        return Rejection(
            RejectReason.DURATION_OUT_OF_RANGE,
            f"{clip.duration_s} s not in [{min_s}, {max_s}]",
        )
    if not (clip.quality_score > quality_threshold):
        return Rejection(
            RejectReason.QUALITY_BELOW_THRESHOLD,
            f"{clip.quality_score} <= {quality_threshold}",
        )
    if record.embedding.dim != db_dim:
        return Rejection(
            RejectReason.DIMENSION_MISMATCH, f"dim {record.embedding.dim} != {db_dim}"
        )
    return None

