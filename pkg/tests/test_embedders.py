import hashlib
import json
import os
import struct
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stylerag.core import Script, UserPreference, Utterance
from stylerag.embedders import (
    CharacterProfile,
    EmbedderEndpoint,
    EmbedderKind,
    EmbedderSet,
    ProfileCache,
    Transport,
    build_context_window,
    embed_emotion,
    embed_profile,
    embed_reference,
    embed_user,
    make_reference_embedder_server,
)
from stylerag.errors import EndpointUnavailable, PositionOutOfRange

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "reference_embedder_golden.json")


def hash_embed(salt, payload, dim, seed):
    """Byte-level rewrite of the reference embedder using struct, no numpy."""
    key = hashlib.blake2b((salt + "\x1f" + str(seed)).encode(), digest_size=32).digest()
    out = []
    counter = 0
    while len(out) < dim:
        h = hashlib.blake2b(payload.encode() + b"\x1d" + struct.pack("<Q", counter), key=key, digest_size=64)
        for (u,) in struct.iter_unpack("<Q", h.digest()):
            out.append(2.0 * u / (2**64 - 1) - 1.0)
        counter += 1
    return out[:dim]


def load_golden():
    with open(GOLDEN, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.mark.parametrize("case", load_golden(), ids=lambda c: f"{c['salt']}-{c['dim']}-{c['seed']}")
def test_reference_matches_golden(case):
    got = embed_reference(case["salt"], case["payload"], case["dim"], case["seed"])
    assert got.tolist() == case["vector"]


@pytest.mark.parametrize("case", load_golden(), ids=lambda c: f"{c['salt']}-{c['dim']}")
def test_golden_matches_independent_oracle(case):
    assert hash_embed(case["salt"], case["payload"], case["dim"], case["seed"]) == pytest.approx(
        case["vector"], rel=0, abs=1e-15)


def test_one_character_changes_vector():
    a, b = load_golden()[:2]
    assert a["vector"] != b["vector"]


@given(st.text(max_size=40), st.integers(1, 40), st.integers(0, 2**31))
def test_reference_range_and_determinism(payload, dim, seed):
    v = embed_reference("emotion", payload, dim, seed)
    assert v.shape == (dim,)
    assert np.all(v >= -1.0) and np.all(v <= 1.0)
    assert np.array_equal(v, embed_reference("emotion", payload, dim, seed))


def test_salt_separates_kinds():
    assert not np.array_equal(embed_reference("profile", "x", 8), embed_reference("emotion", "x", 8))


def _script(n):
    return Script("s", tuple(Utterance(f"spk{i % 3}", f"line {i}") for i in range(n)))


@pytest.mark.parametrize("position, expected", [(0, 0), (1, 1), (4, 4), (5, 5), (9, 5)])
def test_context_window_size(position, expected):
    win = build_context_window(_script(12), position, 5)
    assert len(win.utterances) == expected


@given(st.integers(1, 30).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1), st.integers(1, 8))))
def test_context_window_property(args):
    n, pos, w = args
    script = _script(n)
    win = build_context_window(script, pos, w)
    assert len(win.utterances) == min(w, pos)
    assert win.utterances == script.utterances[pos - len(win.utterances):pos]
    assert script.utterances[pos] not in win.utterances


def test_context_window_out_of_range():
    with pytest.raises(PositionOutOfRange):
        build_context_window(_script(3), 3)


def test_user_absent_is_zero():
    ep = EmbedderEndpoint(EmbedderKind.USER, dim=16)
    assert not embed_user(ep, None).any()
    assert not embed_user(ep, UserPreference()).any()
    assert embed_user(ep, UserPreference(region="north")).any()


def test_zero_transport():
    ep = EmbedderEndpoint(EmbedderKind.PROFILE, Transport.ZERO, dim=4)
    assert embed_profile(ep, "a: b", "a").tolist() == [0.0] * 4


def test_http_unreachable_raises():
    ep = EmbedderEndpoint(EmbedderKind.PROFILE, Transport.HTTP_CLIENT, "http://127.0.0.1:9", timeout_ms=200, dim=4)
    with pytest.raises(EndpointUnavailable):
        embed_profile(ep, "a: b", "a")


def test_http_loopback_matches_in_process():
    server = make_reference_embedder_server(seed=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        address = f"http://127.0.0.1:{server.server_address[1]}"
        local, remote = EmbedderSet.reference(24, 0), EmbedderSet.http(address, 24)
        script = _script(8)
        win = build_context_window(script, 6)
        prof = CharacterProfile("s", "spk0", "a calm narrator")
        pref = UserPreference(gender="female", region="north")
        assert np.array_equal(embed_profile(local.profile, script.full_text, "spk0"),
                              embed_profile(remote.profile, script.full_text, "spk0"))
        assert np.array_equal(embed_emotion(local.emotion, "hi", prof, win),
                              embed_emotion(remote.emotion, "hi", prof, win))
        assert np.array_equal(embed_user(local.user, pref), embed_user(remote.user, pref))
    finally:
        server.shutdown()
        server.server_close()


def test_profile_cache_reuses_vector():
    cache, ep, script = ProfileCache(), EmbedderEndpoint(EmbedderKind.PROFILE, dim=8), _script(6)
    p1, v1 = cache.get(script, "spk1", ep)
    p2, v2 = cache.get(script, "spk1", ep)
    assert v1 is v2 and p1 == p2 and len(cache) == 1
    cache.get(script, "spk1", EmbedderEndpoint(EmbedderKind.PROFILE, dim=8, seed=1))
    assert len(cache) == 2
