"""Competitor codecs behind one compress/decompress interface.

All codecs share the framed container of the main codec; the header byte
that is reserved there carries a codec id here, so a payload is
self-describing and ``decode_payload`` can dispatch on it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import codec
from .codec import (
    CODEC_ID_FASTSGD,
    CodecConfig,
    CompressedGradient,
    CorruptPayloadError,
    SparseGradient,
    parse_header,
)

CODEC_ID_IDENTITY = 1
CODEC_ID_TOPK = 2
CODEC_ID_LOGQUANT = 3

_LOGQUANT_BIAS = 64  # exponent clamp range [-64, 63]


def _pack_frame(codec_id: int, flag_size: int, max_bits: int, count: int,
                total: float, body: bytes) -> bytes:
    return CompressedGradient(
        total=total,
        count=count,
        max_bits=max_bits,
        flag_size=flag_size,
        value_bytes=b"",
        key_bytes=body,
    ).to_bytes(codec_id)


@dataclass(frozen=True)
class FastSGDCodec:
    """The main codec, wrapped for the common encode/decode-bytes interface."""

    cfg: CodecConfig = field(default_factory=CodecConfig)
    name = "fastsgd"

    def encode(self, grad: SparseGradient) -> bytes:
        return codec.compress(grad, self.cfg).to_bytes()

    def decode(self, payload: bytes, dimension: int) -> SparseGradient:
        comp = CompressedGradient.from_bytes(payload)
        return codec.decompress(comp, self.cfg, dimension)


@dataclass(frozen=True)
class IdentityCodec:
    """No compression: 4-byte keys plus 4-byte float values, 64 bits per entry.

    Single-precision values keep the payload at the conventional
    64-bits-per-element baseline; the roundtrip is exact for values
    representable in float32.
    """

    name = "identity"

    def encode(self, grad: SparseGradient) -> bytes:
        keys = grad.keys.astype("<u4").tobytes()
        values = grad.values.astype("<f4").tobytes()
        return _pack_frame(CODEC_ID_IDENTITY, 0, 0, grad.nnz, 0.0, keys + values)

    def decode(self, payload: bytes, dimension: int) -> SparseGradient:
        _, _, codec_id, count, _, body = parse_header(payload)
        if codec_id != CODEC_ID_IDENTITY:
            raise CorruptPayloadError(f"unexpected codec id {codec_id}")
        if len(body) != 8 * count:
            raise CorruptPayloadError(
                f"identity payload for {count} entries should be {8 * count} bytes, got {len(body)}"
            )
        keys = np.frombuffer(body[: 4 * count], dtype="<u4").astype(np.int64)
        values = np.frombuffer(body[4 * count:], dtype="<f4").astype(np.float64)
        return SparseGradient(keys, values, dimension)


@dataclass(frozen=True)
class TopKCodec:
    """Keep only the k largest-magnitude entries, values at full precision.

    k may be an absolute count (int >= 1) or a fraction of the gradient
    dimension (float in (0, 1]); ties break toward the smaller key.  Keys
    reuse the adaptive delta bit-packing of the main codec.
    """

    k: float | int = 0.001
    flag_size: int = 2
    name = "topk"

    def __post_init__(self):
        if isinstance(self.k, int):
            if self.k < 1:
                raise ValueError(f"absolute k must be >= 1, got {self.k}")
        elif not 0.0 < self.k <= 1.0:
            raise ValueError(f"fractional k must be in (0, 1], got {self.k}")

    def resolve_k(self, dimension: int) -> int:
        if isinstance(self.k, int):
            return self.k
        return max(1, int(self.k * dimension))

    def encode(self, grad: SparseGradient) -> bytes:
        if grad.nnz == 0:
            raise ValueError("cannot encode an empty gradient")
        k = min(self.resolve_k(grad.dimension), grad.nnz)
        # stable sort on descending magnitude keeps the smaller key on ties
        order = np.argsort(-np.abs(grad.values), kind="stable")[:k]
        picked = np.sort(order)
        keys = grad.keys[picked]
        values = grad.values[picked]
        key_bytes, max_bits = codec.encode_keys(keys, self.flag_size)
        body = values.astype("<f8").tobytes() + key_bytes
        total = float(np.sum(np.abs(grad.values)))
        return _pack_frame(CODEC_ID_TOPK, self.flag_size, max_bits, k, total, body)

    def decode(self, payload: bytes, dimension: int) -> SparseGradient:
        flag_size, max_bits, codec_id, count, _, body = parse_header(payload)
        if codec_id != CODEC_ID_TOPK:
            raise CorruptPayloadError(f"unexpected codec id {codec_id}")
        if len(body) < 8 * count:
            raise CorruptPayloadError("top-k value section truncated")
        values = np.frombuffer(body[: 8 * count], dtype="<f8")
        keys = codec.decode_keys(body[8 * count:], count, max_bits, flag_size)
        if count and keys[-1] >= dimension:
            raise CorruptPayloadError(
                f"decoded key {int(keys[-1])} out of range for dimension {dimension}"
            )
        return SparseGradient(keys, values, dimension)


@dataclass(frozen=True)
class LogQuantCodec:
    """Base-2 logarithmic value quantization, one byte per value.

    Each value becomes sign plus round-to-nearest of log2(|v|), with the
    exponent clamped to [-64, 63]; keys travel uncompressed as 4-byte
    little-endian integers.
    """

    name = "logquant"

    def encode(self, grad: SparseGradient) -> bytes:
        if grad.nnz == 0:
            raise ValueError("cannot encode an empty gradient")
        exponents = np.rint(np.log2(np.abs(grad.values))).astype(np.int64)
        exponents = np.clip(exponents, -_LOGQUANT_BIAS, _LOGQUANT_BIAS - 1)
        value_bytes = ((exponents + _LOGQUANT_BIAS).astype(np.uint8)
                       | np.where(grad.values < 0, 0x80, 0).astype(np.uint8))
        body = value_bytes.tobytes() + grad.keys.astype("<u4").tobytes()
        return _pack_frame(CODEC_ID_LOGQUANT, 0, 0, grad.nnz, 0.0, body)

    def decode(self, payload: bytes, dimension: int) -> SparseGradient:
        _, _, codec_id, count, _, body = parse_header(payload)
        if codec_id != CODEC_ID_LOGQUANT:
            raise CorruptPayloadError(f"unexpected codec id {codec_id}")
        if len(body) != 5 * count:
            raise CorruptPayloadError(
                f"logquant payload for {count} entries should be {5 * count} bytes, got {len(body)}"
            )
        raw = np.frombuffer(body[:count], dtype=np.uint8)
        exponents = (raw & 0x7F).astype(np.float64) - _LOGQUANT_BIAS
        signs = np.where(raw & 0x80, -1.0, 1.0)
        keys = np.frombuffer(body[count:], dtype="<u4").astype(np.int64)
        return SparseGradient(keys, signs * np.exp2(exponents), dimension)


def make_codec(kind: str, cfg: CodecConfig | None = None,
               topk_k: float | int = 0.001, **_ignored):
    """Codec factory used by the simulator and the CLI."""
    cfg = cfg or CodecConfig()
    if kind == "fastsgd":
        return FastSGDCodec(cfg)
    if kind == "identity":
        return IdentityCodec()
    if kind == "topk":
        return TopKCodec(k=topk_k, flag_size=cfg.flag_size)
    if kind == "logquant":
        return LogQuantCodec()
    raise ValueError(f"unknown codec kind {kind!r}")


def decode_payload(payload: bytes, dimension: int,
                   cfg: CodecConfig | None = None) -> SparseGradient:
    """Dispatch on the codec id byte of a framed payload."""
    _, _, codec_id, _, _, _ = parse_header(payload)
    if codec_id == CODEC_ID_FASTSGD:
        return FastSGDCodec(cfg or CodecConfig()).decode(payload, dimension)
    if codec_id == CODEC_ID_IDENTITY:
        return IdentityCodec().decode(payload, dimension)
    if codec_id == CODEC_ID_TOPK:
        return TopKCodec().decode(payload, dimension)
    if codec_id == CODEC_ID_LOGQUANT:
        return LogQuantCodec().decode(payload, dimension)
    raise CorruptPayloadError(f"unknown codec id {codec_id}")
