"""Seeded synthetic segment streams and the chunker contract checks."""

from __future__ import annotations

import random

from stylerag.ingestion import RawSegment

WORDS = "the a storm quiet harbor lantern she said never again bright morning why".split()


def random_stream(seed: int, n_max: int = 25, source: str = "mem://stream.wav") -> list[RawSegment]:
    """Ordered, non-overlapping segments mixing short, mid and long lengths."""
    rng = random.Random(seed)
    speakers = [f"spk{i}" for i in range(rng.randint(1, 4))]
    t = round(rng.uniform(0, 3), 3)
    out = []
    for _ in range(rng.randint(1, n_max)):
        kind = rng.random()
        length = rng.uniform(0.3, 4.9) if kind < 0.45 else rng.uniform(5, 10) if kind < 0.7 else rng.uniform(10, 45)
        start, end = round(t, 3), round(t + length, 3)
        silences = tuple(sorted(round(rng.uniform(start, end), 3) for _ in range(rng.randint(0, 6))))
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 30)))
        out.append(RawSegment(source, start, end, rng.choice(speakers), 0.9, text, silences))
        t = end + rng.choice([0.0, rng.uniform(0, 1.0), rng.uniform(1.0, 4.0)])
    return out


def contract_violations(segments, kept, dropped, min_s=5.0, max_s=10.0):
    """Return human-readable violations of the chunker contract (empty when it holds)."""
    problems = []
    for d in kept:
        if not (min_s <= d.duration_s <= max_s):
            problems.append(f"{d.clip_id}: duration {d.duration_s}")
        inside = [s for s in segments if any(s.start_s <= a and b <= s.end_s for a, b in d.spans)]
        if len({s.speaker_id for s in inside}) != 1 or inside[0].speaker_id != d.speaker_id:
            problems.append(f"{d.clip_id}: speaker mixing")
        for a, b in d.spans:
            if not any(s.start_s <= a and b <= s.end_s for s in segments):
                problems.append(f"{d.clip_id}: span {a}-{b} crosses a segment boundary")
    total_in = sum(s.end_s - s.start_s for s in segments)
    total_out = sum(d.duration_s for d in kept) + sum(d.duration_s for d in dropped)
    if abs(total_in - total_out) > 1e-6 * max(1, len(segments)):
        problems.append(f"duration not conserved: {total_in} vs {total_out}")
    return problems
