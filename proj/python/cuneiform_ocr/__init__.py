"""Cuneiform glyph OCR: segmentation, classification and sign lookup."""

from ._core import *  # noqa: F401,F403
from ._core import CuneiformError, Lexicon, Model

__all__ = [name for name in dir() if not name.startswith("_")]
