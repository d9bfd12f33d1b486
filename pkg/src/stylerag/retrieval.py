"""Style-prompt selection: gate, rewrite, embed, search, assemble.

``retrieve`` runs the whole chain for one :class:`~stylerag.core.StyleQuery`::

    gate -> rewrite -> context window -> component embeddings
         -> style embedding (profile + emotion + user) -> MIPS -> bundle

The embedding mode switches reproduce the ablation settings: with
``only_profile`` the emotion component is replaced by zeros, with
``only_emotion`` the profile component is.  Whether the user component is
added is controlled separately by ``include_user``.
"""

from __future__ import annotations

import enum
import json
import logging
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .core import (
    KnowledgeRecord,
    Script,
    SpeechClip,
    StyleEmbedding,
    StyleQuery,
    UserPreference,
    compose_style_embedding,
)
from .embedders import (
    DEFAULT_WINDOW,
    CharacterProfile,
    EmbedderSet,
    ProfileCache,
    build_context_window,
    embed_emotion,
    embed_user,
)
from .errors import EmptyBundle, EmptyDatabase, InvalidQuery, PositionOutOfRange, UnknownClipId
from .index import IndexMode, RetrievalHit, SearchRequest, StyleIndex, search

log = logging.getLogger(__name__)

EXHAUSTIVE = "exhaustive"


class EmbeddingMode(str, enum.Enum):
    PROFILE_PLUS_EMOTION = "profile_plus_emotion"
    ONLY_PROFILE = "only_profile"
    ONLY_EMOTION = "only_emotion"

    @classmethod
    def parse(cls, text: str | "EmbeddingMode") -> "EmbeddingMode":
        if isinstance(text, EmbeddingMode):
            return text
        key = text.strip().lower().replace("+", "_plus_").replace("-", "_")
        aliases = {"profile_plus_emotion": cls.PROFILE_PLUS_EMOTION, "only_profile": cls.ONLY_PROFILE,
                   "profile_only": cls.ONLY_PROFILE, "only_emotion": cls.ONLY_EMOTION,
                   "emotion_only": cls.ONLY_EMOTION}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown embedding mode {text!r}") from None


@dataclass(frozen=True)
class RetrievalConfig:
    """Retrieval knobs.

    ``k=None`` defers to ``StyleQuery.k`` (default 3).  ``probes`` is a
    positive int, ``"exhaustive"``, or None for the index default.
    ``include_user=None`` adds the user component only when the query
    carries a non-empty preference.
    """

    k: int | None = None
    embedding_mode: EmbeddingMode = EmbeddingMode.PROFILE_PLUS_EMOTION
    probes: int | str | None = None
    include_user: bool | None = None
    window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding_mode", EmbeddingMode.parse(self.embedding_mode))
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if isinstance(self.probes, str) and self.probes != EXHAUSTIVE:
            raise ValueError(f"probes must be a positive int or {EXHAUSTIVE!r}")
        if isinstance(self.probes, int) and self.probes < 1:
            raise ValueError("probes must be >= 1")

    def probes_for(self, index: StyleIndex) -> int | None:
        if self.probes == EXHAUSTIVE:
            return max(index.n_clusters, 1)
        return self.probes  # type: ignore[return-value]


@dataclass(frozen=True)
class StylePromptBundle:
    prompts: tuple[tuple[SpeechClip, float], ...]
    retrieved: bool = True

    @property
    def concatenation_manifest(self) -> list[str]:
        return [clip.clip_id for clip, _ in self.prompts]

    @property
    def total_duration_s(self) -> float:
        return round(sum(clip.duration_s for clip, _ in self.prompts), 6)

    def __len__(self) -> int:
        return len(self.prompts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "retrieved": self.retrieved,
            "prompts": [
                {"rank": i, "score": score, "clip": clip.to_dict()}
                for i, (clip, score) in enumerate(self.prompts, start=1)
            ],
            "concatenation_manifest": self.concatenation_manifest,
            "total_duration_s": self.total_duration_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StylePromptBundle":
        prompts = tuple((SpeechClip.from_dict(p["clip"]), float(p["score"])) for p in d["prompts"])
        return cls(prompts, bool(d.get("retrieved", True)))


class RecordStore:
    """clip_id -> KnowledgeRecord lookup backing an index."""

    def __init__(self, records: Iterable[KnowledgeRecord] = ()) -> None:
        self._by_id: dict[str, KnowledgeRecord] = {r.clip_id: r for r in records}

    def __getitem__(self, clip_id: str) -> KnowledgeRecord:
        try:
            return self._by_id[clip_id]
        except KeyError:
            raise UnknownClipId(clip_id) from None

    def __contains__(self, clip_id: object) -> bool:
        return clip_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def get(self, clip_id: str) -> KnowledgeRecord | None:
        return self._by_id.get(clip_id)

    def records(self) -> list[KnowledgeRecord]:
        return [self._by_id[k] for k in sorted(self._by_id)]


def needs_retrieval(query: StyleQuery) -> bool:
    """Skip retrieval when the caller already chose a style clip."""
    return query.explicit_style_clip is None


def rewrite_text(utterance_text: str, profile_text: str, pref: UserPreference | None) -> str:
    """Expand an utterance with speaker and listener context.

    Layout (absent parts omitted)::

        <utterance>
        [profile] <profile text>
        [preference] age_band=..; gender=..; region=..; free_text=..
    """
    lines = [utterance_text]
    if profile_text:
        lines.append(f"[profile] {profile_text}")
    if pref is not None and not pref.is_empty:
        lines.append("[preference] " + "; ".join(f"{k}={v}" for k, v in pref.fields()))
    return "\n".join(lines)


def rewrite_query(query: StyleQuery, profile: CharacterProfile) -> str:
    return rewrite_text(query.utterance_text, profile.profile_text, query.user_pref)


def assemble_prompts(hits: list[RetrievalHit], store: RecordStore) -> StylePromptBundle:
    """Resolve hits to clips, keeping hit order for concatenation."""
    if not hits:
        raise EmptyBundle("no hits to assemble")
    return StylePromptBundle(tuple((store[h.clip_id].clip, h.score) for h in hits))


def _zeros(dim: int) -> np.ndarray:
    return np.zeros(dim)


def query_embedding(
    query: StyleQuery,
    config: RetrievalConfig,
    endpoints: EmbedderSet,
    script: Script,
    cache: ProfileCache | None = None,
) -> StyleEmbedding:
    """Compose the search vector for ``query`` under ``config``."""
    if not 0 <= query.position < len(script):
        raise PositionOutOfRange(f"position {query.position} outside script of length {len(script)}")
    cache = cache if cache is not None else ProfileCache()
    dim = endpoints.dim
    speaker = script.utterances[query.position].speaker_id
    profile, pvec = cache.get(script, speaker, endpoints.profile)
    mode = config.embedding_mode

    p = pvec if mode is not EmbeddingMode.ONLY_EMOTION else _zeros(dim)
    if mode is EmbeddingMode.ONLY_PROFILE:
        e = _zeros(dim)
    else:
        ctx = build_context_window(script, query.position, config.window)
        e = embed_emotion(endpoints.emotion, rewrite_query(query, profile), profile, ctx)
    has_pref = query.user_pref is not None and not query.user_pref.is_empty
    include_user = has_pref if config.include_user is None else config.include_user
    u = embed_user(endpoints.user, query.user_pref) if include_user else _zeros(dim)
    return compose_style_embedding(p, e, u)


Gate = Callable[[StyleQuery], bool]


def retrieve(
    query: StyleQuery,
    config: RetrievalConfig,
    index: StyleIndex,
    endpoints: EmbedderSet,
    script: Script,
    store: RecordStore,
    *,
    cache: ProfileCache | None = None,
    gate: Gate = needs_retrieval,
) -> StylePromptBundle:
    """Select the style prompts for one utterance.

    Raises:
        EmptyDatabase: the index holds no records.
        EndpointUnavailable: an embedder could not be reached.
    """
    qid = uuid.uuid4().hex[:12]
    if not gate(query):
        assert query.explicit_style_clip is not None
        log.info("retrieval skipped", extra={"query_id": qid, "gate": False})
        return StylePromptBundle(((query.explicit_style_clip, 0.0),), retrieved=False)
    if index.count == 0:
        raise EmptyDatabase("the style index is empty")
    emb = query_embedding(query, config, endpoints, script, cache)
    k = config.k if config.k is not None else query.k
    probes = config.probes_for(index)
    hits = search(index, SearchRequest(emb.values, k, probes))
    log.info(
        "retrieval done",
        extra={
            "query_id": qid,
            "gate": True,
            "mode": config.embedding_mode.value,
            "k": k,
            "probes": (probes or index.default_probes()) if index.mode is IndexMode.CLUSTERED else "exact",
            "hits": [h.clip_id for h in hits],
        },
    )
    return assemble_prompts(hits, store)


@dataclass
class StyleRetriever:
    """Long-lived retrieval state: index, records, embedders, profile cache."""

    index: StyleIndex
    store: RecordStore
    endpoints: EmbedderSet
    scripts: dict[str, Script] = field(default_factory=dict)
    cache: ProfileCache = field(default_factory=ProfileCache)
    gate: Gate = needs_retrieval

    def retrieve(
        self, query: StyleQuery, config: RetrievalConfig = RetrievalConfig(), script: Script | None = None
    ) -> StylePromptBundle:
        if script is None:
            try:
                script = self.scripts[query.script_id]
            except KeyError:
                raise InvalidQuery(f"unknown script {query.script_id!r}") from None
        return retrieve(
            query, config, self.index, self.endpoints, script, self.store,
            cache=self.cache, gate=self.gate,
        )
