"""Retrieval-augmented style-prompt selection for expressive TTS."""

__version__ = "0.1.0"
