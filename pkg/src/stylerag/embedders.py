"""Embedder endpoints for the three style components.

Three slots feed the style embedding: a character-profile embedder (reads the
whole script), a situational-emotion embedder (reads one utterance, the
speaker's profile and the preceding dialogue) and a user-preference encoder.
Each slot is an :class:`EmbedderEndpoint` that is either served in process by
the deterministic reference embedder or reached over HTTP.

Reference embedder
------------------
``embed_reference(salt, payload, dim, seed)`` is a keyed hash expansion:

* key   = BLAKE2b-256 of ``"<salt>\\x1f<seed>"`` (UTF-8)
* block = BLAKE2b-512(key=key) over ``payload_utf8 + b"\\x1d" + counter_u64_le``
  for counter = 0, 1, 2, ...
* every 8 bytes of the concatenated blocks, read as a little-endian u64 ``u``,
  become one coordinate ``2 * u / (2**64 - 1) - 1``.

Payloads are canonical strings: fields joined with U+001F (unit separator),
sub-fields (speaker, text) of a context utterance joined with U+001E.

* profile: ``script_text, speaker_id``
* emotion: ``utterance_text, profile_text, ctx_0, ..., ctx_{n-1}``
* user:    ``name=value`` for each present field in the order
  age_band, gender, region, free_text

The output is pinned by ``tests/data/reference_embedder_golden.json``.
"""

from __future__ import annotations

import enum
import hashlib
import json
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Sequence

import numpy as np

from .core import DEFAULT_DIM, Script, UserPreference, Utterance
from .errors import DimensionMismatch, EndpointUnavailable, PositionOutOfRange

DEFAULT_WINDOW = 5
UNIT_SEP = "\x1f"
RECORD_SEP = "\x1e"
_COUNTER_SEP = b"\x1d"
_U64_MAX = float(2**64 - 1)


class EmbedderKind(str, enum.Enum):
    PROFILE = "profile"
    EMOTION = "emotion"
    USER = "user"


class Transport(str, enum.Enum):
    IN_PROCESS_REFERENCE = "in_process_reference"
    HTTP_CLIENT = "http_client"
    # always returns zeros; used to switch a component off
    ZERO = "zero"


@dataclass(frozen=True)
class ContextWindow:
    center_index: int
    window_size: int
    utterances: tuple[Utterance, ...]


class ProfileSource(str, enum.Enum):
    EXTERNAL_MODEL = "external_model"
    PROVIDED = "provided"
    REFERENCE = "reference"


@dataclass(frozen=True)
class CharacterProfile:
    script_id: str
    speaker_id: str
    profile_text: str
    source: ProfileSource = ProfileSource.REFERENCE


@dataclass(frozen=True)
class EmbedderEndpoint:
    kind: EmbedderKind
    transport: Transport = Transport.IN_PROCESS_REFERENCE
    address: str | None = None
    timeout_ms: int = 5000
    dim: int = DEFAULT_DIM
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EmbedderKind(self.kind))
        object.__setattr__(self, "transport", Transport(self.transport))
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")
        if self.transport is Transport.HTTP_CLIENT and not self.address:
            raise ValueError("http_client endpoints need an address")


@dataclass(frozen=True)
class EmbedderSet:
    """The three component endpoints used together for one database."""

    profile: EmbedderEndpoint
    emotion: EmbedderEndpoint
    user: EmbedderEndpoint

    @classmethod
    def reference(cls, dim: int = DEFAULT_DIM, seed: int = 0) -> "EmbedderSet":
        return cls(
            EmbedderEndpoint(EmbedderKind.PROFILE, dim=dim, seed=seed),
            EmbedderEndpoint(EmbedderKind.EMOTION, dim=dim, seed=seed),
            EmbedderEndpoint(EmbedderKind.USER, dim=dim, seed=seed),
        )

    @classmethod
    def http(cls, address: str, dim: int = DEFAULT_DIM, timeout_ms: int = 5000) -> "EmbedderSet":
        return cls(
            *(
                EmbedderEndpoint(kind, Transport.HTTP_CLIENT, address, timeout_ms, dim)
                for kind in EmbedderKind
            )
        )

    @property
    def dim(self) -> int:
        dims = {self.profile.dim, self.emotion.dim, self.user.dim}
        if len(dims) != 1:
            raise DimensionMismatch(f"embedder dims disagree: {sorted(dims)}")
        return dims.pop()


def build_context_window(
    script: Script | Sequence[Utterance], position: int, w: int = DEFAULT_WINDOW
) -> ContextWindow:
    """Select the ``min(w, position)`` utterances just before ``position``."""
    utts = script.utterances if isinstance(script, Script) else tuple(script)
    if w < 1:
        raise ValueError("window size must be >= 1")
    if not 0 <= position < len(utts):
        raise PositionOutOfRange(f"position {position} outside script of length {len(utts)}")
    start = max(0, position - w)
    return ContextWindow(position, w, tuple(utts[start:position]))


def embed_reference(salt: str, payload: str, dim: int, seed: int = 0) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    key = hashlib.blake2b(f"{salt}{UNIT_SEP}{seed}".encode("utf-8"), digest_size=32).digest()
    base = hashlib.blake2b(key=key, digest_size=64)
    base.update(payload.encode("utf-8", "surrogatepass"))
    base.update(_COUNTER_SEP)
    n_blocks = -(-dim // 8)
    raw = bytearray()
    for counter in range(n_blocks):
        h = base.copy()
        h.update(counter.to_bytes(8, "little"))
        raw += h.digest()
    words = np.frombuffer(bytes(raw), dtype="<u8")[:dim]
    return words.astype(np.float64) / _U64_MAX * 2.0 - 1.0


def profile_payload(script_text: str, speaker_id: str) -> str:
    return UNIT_SEP.join([script_text, speaker_id])


def emotion_payload(utterance_text: str, profile_text: str, context: ContextWindow) -> str:
    ctx = [f"{u.speaker_id}{RECORD_SEP}{u.text}" for u in context.utterances]
    return UNIT_SEP.join([utterance_text, profile_text, *ctx])


def user_payload(pref: UserPreference) -> str:
    return UNIT_SEP.join(f"{k}={v}" for k, v in pref.fields())


def _post_json(address: str, route: str, body: dict[str, Any], timeout_ms: int) -> dict[str, Any]:
    url = address.rstrip("/") + route
    data = json.dumps(body).encode("utf-8")
    req = urllib.request.Request(
        url, data=data, method="POST", headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout_ms / 1000.0) as resp:
            if resp.status != 200:
                raise EndpointUnavailable(f"{url} returned HTTP {resp.status}")
            return json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise EndpointUnavailable(f"{url} returned HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise EndpointUnavailable(f"{url} unreachable: {exc}") from exc


def _call(endpoint: EmbedderEndpoint, payload_fields: dict[str, Any], canonical: str) -> np.ndarray:
    if endpoint.transport is Transport.ZERO:
        return np.zeros(endpoint.dim)
    if endpoint.transport is Transport.IN_PROCESS_REFERENCE:
        vec = embed_reference(endpoint.kind.value, canonical, endpoint.dim, endpoint.seed)
    else:
        body = {"kind": endpoint.kind.value, "dim": endpoint.dim, "payload": payload_fields}
        resp = _post_json(endpoint.address or "", "/embed", body, endpoint.timeout_ms)
        try:
            vec = np.asarray(resp["vector"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise EndpointUnavailable(f"malformed embedder response: {exc}") from exc
    if vec.ndim != 1 or vec.shape[0] != endpoint.dim:
        raise DimensionMismatch(f"{endpoint.kind.value} embedder returned shape {vec.shape}, want ({endpoint.dim},)")
    if not np.all(np.isfinite(vec)):
        raise DimensionMismatch(f"{endpoint.kind.value} embedder returned non-finite values")
    return vec


def _expect(endpoint: EmbedderEndpoint, kind: EmbedderKind) -> None:
    if endpoint.kind is not kind:
        raise ValueError(f"expected a {kind.value} endpoint, got {endpoint.kind.value}")


def embed_profile(endpoint: EmbedderEndpoint, full_script_text: str, speaker_id: str) -> np.ndarray:
    _expect(endpoint, EmbedderKind.PROFILE)
    if not full_script_text:
        raise ValueError("script text must be non-empty")
    return _call(
        endpoint,
        {"script_text": full_script_text, "speaker_id": speaker_id},
        profile_payload(full_script_text, speaker_id),
    )


def embed_emotion(
    endpoint: EmbedderEndpoint,
    utterance_text: str,
    profile: CharacterProfile,
    context: ContextWindow,
) -> np.ndarray:
    _expect(endpoint, EmbedderKind.EMOTION)
    fields = {
        "utterance_text": utterance_text,
        "profile_text": profile.profile_text,
        "context": [[u.speaker_id, u.text] for u in context.utterances],
    }
    return _call(endpoint, fields, emotion_payload(utterance_text, profile.profile_text, context))


def embed_user(endpoint: EmbedderEndpoint, pref: UserPreference | None) -> np.ndarray:
    """Encode a listener preference; an absent or empty preference is all zeros."""
    _expect(endpoint, EmbedderKind.USER)
    if pref is None or pref.is_empty:
        return np.zeros(endpoint.dim)
    return _call(endpoint, pref.to_dict(), user_payload(pref))


def reference_profile(script: Script, speaker_id: str) -> CharacterProfile:
    """Deterministic stand-in for an LLM-written character summary."""
    lines = script.speaker_lines(speaker_id)
    words = [w for line in lines for w in line.split()]
    vocab = sorted(set(w.lower().strip(".,!?;:\"'") for w in words) - {""})
    opening = " ".join(lines[0].split()[:12]) if lines else ""
    text = (
        f"speaker {speaker_id}; {len(lines)} lines, {len(words)} words, "
        f"{len(vocab)} distinct; opens with: {opening}"
    )
    return CharacterProfile(script.script_id, speaker_id, text, ProfileSource.REFERENCE)


@dataclass
class ProfileCache:
    """Per-(script, speaker) cache of profile text and profile vector.

    Values are deterministic, so a race between two writers of the same key
    is harmless.
    """

    _items: dict[tuple[str, str, EmbedderEndpoint], tuple[CharacterProfile, np.ndarray]] = field(
        default_factory=dict
    )
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def get(
        self, script: Script, speaker_id: str, endpoint: EmbedderEndpoint
    ) -> tuple[CharacterProfile, np.ndarray]:
        key = (script.script_id, speaker_id, endpoint)
        hit = self._items.get(key)
        if hit is not None:
            return hit
        profile = reference_profile(script, speaker_id)
        vec = embed_profile(endpoint, script.full_text, speaker_id)
        vec.setflags(write=False)
        with self._lock:
            self._items[key] = (profile, vec)
        return profile, vec

    def __len__(self) -> int:
        return len(self._items)


def _reference_from_wire(kind: str, dim: int, payload: dict[str, Any], seed: int) -> np.ndarray:
    kind_e = EmbedderKind(kind)
    ep = EmbedderEndpoint(kind_e, dim=dim, seed=seed)
    if kind_e is EmbedderKind.PROFILE:
        return embed_profile(ep, payload["script_text"], payload["speaker_id"])
    if kind_e is EmbedderKind.EMOTION:
        ctx = tuple(Utterance(s, t) for s, t in payload.get("context", []))
        window = ContextWindow(len(ctx), max(len(ctx), 1), ctx)
        profile = CharacterProfile("", "", payload.get("profile_text", ""))
        return embed_emotion(ep, payload["utterance_text"], profile, window)
    return embed_user(ep, UserPreference.from_dict(payload))


def make_reference_embedder_server(host: str = "127.0.0.1", port: int = 0, seed: int = 0) -> ThreadingHTTPServer:
    """HTTP server answering ``POST /embed`` with the reference embedder.

    Call ``serve_forever()`` (typically on a thread) and ``shutdown()``.
    """

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args: Any) -> None:
            pass

        def do_POST(self) -> None:
            if self.path != "/embed":
                self.send_error(404)
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                vec = _reference_from_wire(body["kind"], int(body["dim"]), body["payload"], seed)
            except Exception as exc:  # noqa: BLE001 - reported to the client
                self.send_error(400, str(exc))
                return
            out = json.dumps({"vector": vec.tolist()}).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

    return ThreadingHTTPServer((host, port), Handler)
