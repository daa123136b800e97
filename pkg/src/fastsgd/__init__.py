"""Compressed-gradient codec and data-parallel SGD training simulator."""

from .codec import (
    CodecConfig,
    CompressedGradient,
    SparseGradient,
    compress,
    decompress,
)

__all__ = [
    "CodecConfig",
    "CompressedGradient",
    "SparseGradient",
    "compress",
    "decompress",
]

__version__ = "0.1.0"
