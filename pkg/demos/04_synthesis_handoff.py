"""
Handing prompts to a synthesizer
================================

Retrieved clips set the style and a separate clip sets the timbre.  The
synthesizer's language model reads ``[S, v, text tokens, T, speech tokens, E]``.
"""

import numpy as np

from stylerag.core import SpeechClip
from stylerag.retrieval import StylePromptBundle
from stylerag.tts_adapter import (
    MockSynthesizer,
    SynthesisRequest,
    construct_llm_sequence,
    parse_llm_sequence,
    reference_text_tokens,
    synthesize,
)


def clip(cid, speaker, seconds):
    return SpeechClip(cid, f"mem://{cid}.wav", seconds, speaker, "en", "...", 0.9)


###############################################################################
# Three style prompts in retrieval order and one timbre prompt.

bundle = StylePromptBundle(((clip("calm-1", "mira", 7.5), 3.1),
                            (clip("calm-2", "mira", 6.0), 2.8),
                            (clip("tense-4", "tomas", 9.2), 2.2)))
request = SynthesisRequest("Hold the lantern higher.", clip("voice", "ana", 8.0), bundle)
print(request.to_wire())

###############################################################################
# The mock synthesizer echoes what it got, so the hand-off can be checked
# offline.  Swap in ``HttpSynthesizer(url)`` for a real service.

result = synthesize(request, MockSynthesizer())
print(result.audio_uri, result.descriptor["K_style_clips"])

###############################################################################
# Sequence layout: I text tokens, K speech tokens, four markers.

text = reference_text_tokens(request.text)
speech = [17, 402, 88, 9]
seq = construct_llm_sequence(np.full(4, 0.25), text, speech)
print(seq.kinds(), len(seq), "=", len(text), "+", len(speech), "+ 4")
print(parse_llm_sequence(seq.elements)[:2])
