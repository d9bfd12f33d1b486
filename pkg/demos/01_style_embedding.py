"""
Style embeddings as a sum of three parts
========================================

A style vector is the plain sum of a character-profile vector, a
situational-emotion vector and a listener-preference vector.  Nothing is
normalized, so inner products split cleanly over the three parts.
"""

import numpy as np

from stylerag.core import Script, UserPreference, Utterance, compose_style_embedding
from stylerag.embedders import (
    EmbedderSet,
    build_context_window,
    embed_emotion,
    embed_profile,
    embed_user,
    reference_profile,
)

###############################################################################
# A four-line script.  The reference embedders are deterministic hash
# functions, so the vectors below are the same on every machine.

script = Script("harbor", (
    Utterance("narrator", "The storm rolled in over the harbor."),
    Utterance("mira", "Tie the boats down, quickly!"),
    Utterance("tomas", "I never thought it would come this fast."),
    Utterance("mira", "We will be fine. Hold the lantern."),
))
eps = EmbedderSet.reference(dim=8)

position = 3
speaker = script.utterances[position].speaker_id
profile = reference_profile(script, speaker)
print(profile.profile_text)

###############################################################################
# The emotion embedder sees the line, the profile and up to five earlier lines.

window = build_context_window(script, position, w=5)
print("context:", [u.text for u in window.utterances])

p = embed_profile(eps.profile, script.full_text, speaker)
e = embed_emotion(eps.emotion, script.utterances[position].text, profile, window)
u = embed_user(eps.user, UserPreference(gender="female", region="north"))
style = compose_style_embedding(p, e, u)
print("style:", np.round(style.values, 3))

###############################################################################
# An absent preference contributes zeros, so it leaves the vector unchanged.

no_pref = compose_style_embedding(p, e, embed_user(eps.user, None))
print("equal to profile + emotion:", np.array_equal(no_pref.values, p + e))

###############################################################################
# Scores split over the parts: <p + e + u, x> = <p, x> + <e, x> + <u, x>.

x = np.random.default_rng(0).normal(size=8)
whole = float(style.values @ x)
parts = [float(c @ x) for c in style.components]
print(f"whole {whole:.12f}  parts {sum(parts):.12f}")
