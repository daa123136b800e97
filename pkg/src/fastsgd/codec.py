"""Sparse-gradient codec.

Values go through a reciprocal mapper, logarithm quantization to a small
integer level, and a threshold filter; levels are stored one sign-magnitude
byte each.  Keys of the retained entries are delta-encoded and bit-packed
with an adaptive length flag choosing one of 2^l payload widths.
"""

from __future__ import annotations

import math
import struct
from bisect import bisect_left
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .bitstream import BitReader, BitWriter, TruncatedStreamError

__all__ = [
    "CodecConfig",
    "SparseGradient",
    "CompressedGradient",
    "CorruptPayloadError",
    "TruncatedStreamError",
    "reciprocal_map",
    "log_quantize",
    "encode_values",
    "decode_value",
    "delta_encode",
    "length_levels",
    "encode_keys",
    "decode_keys",
    "compress",
    "decompress",
]

# Relative slack applied when the float-computed ceiling of log_b is corrected
# against exact powers of the base.
_LOG_SLACK = 1e-12

WIRE_MAGIC = b"FSGD"
WIRE_VERSION = 1
# magic, version, flag size l, max delta bits M, codec id, entry count d, sum
_HEADER = struct.Struct("<4sBBBBId")
HEADER_SIZE = _HEADER.size

CODEC_ID_FASTSGD = 0


class CorruptPayloadError(Exception):
    """A compressed payload failed structural validation."""


@dataclass(frozen=True)
class CodecConfig:
    """Hyper-parameters of the value and key encoders.

    base: quantization base b (> 1); around 1.1 balances compression
        against decode error.
    threshold: filter level tau; entries quantized above it are dropped.
        Capped at 127 so a level always fits the 7 magnitude bits of the
        value byte.
    flag_size: bits per length flag l, giving 2^l payload widths.
    """

    base: float = 1.1
    threshold: int = 127
    flag_size: int = 2

    def __post_init__(self):
        if not self.base > 1.0:
            raise ValueError(f"base must be > 1, got {self.base}")
        if not 1 <= self.threshold <= 127:
            raise ValueError(f"threshold must be in [1, 127], got {self.threshold}")
        if not 1 <= self.flag_size <= 5:
            raise ValueError(f"flag_size must be in [1, 5], got {self.flag_size}")


class SparseGradient:
    """Sorted nonzero entries of a gradient vector of a given dimension.

    Entries with value exactly 0 are dropped on construction; keys must be
    strictly increasing and below ``dimension``.
    """

    __slots__ = ("keys", "values", "dimension")

    def __init__(self, keys, values, dimension: int):
        keys = np.asarray(keys, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if keys.shape != values.shape or keys.ndim != 1:
            raise ValueError("keys and values must be 1-d arrays of equal length")
        nonzero = values != 0.0
        if not nonzero.all():
            keys = keys[nonzero]
            values = values[nonzero]
        if keys.size:
            if keys[0] < 0 or np.any(np.diff(keys) <= 0):
                raise ValueError("keys must be non-negative and strictly increasing")
            if keys[-1] >= dimension:
                raise ValueError(
                    f"key {int(keys[-1])} out of range for dimension {dimension}"
                )
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.keys = keys
        self.values = values
        self.dimension = int(dimension)

    @classmethod
    def from_pairs(cls, entries: Sequence[tuple[int, float]], dimension: int) -> "SparseGradient":
        if entries:
            keys, values = zip(*entries)
        else:
            keys, values = (), ()
        return cls(np.array(keys, dtype=np.int64), np.array(values, dtype=np.float64), dimension)

    @property
    def nnz(self) -> int:
        return int(self.keys.size)

    def __len__(self) -> int:
        return self.nnz

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseGradient):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"SparseGradient(nnz={self.nnz}, dimension={self.dimension})"


@dataclass(frozen=True)
class CompressedGradient:
    """Wire-ready compressed gradient.

    total: sum of |v| over every input entry, including filtered ones.
    count: retained entries d.
    max_bits: bit length M of the largest delta key (0 when count is 0).
    flag_size: length-flag width l used for the key bits.
    value_bytes: d sign-magnitude bytes (bit 7 sign, bits 0-6 level).
    key_bytes: bit-packed (flag, delta) records, zero-padded to a byte.
    """

    total: float
    count: int
    max_bits: int
    flag_size: int
    value_bytes: bytes
    key_bytes: bytes

    def to_bytes(self, codec_id: int = CODEC_ID_FASTSGD) -> bytes:
        header = _HEADER.pack(
            WIRE_MAGIC,
            WIRE_VERSION,
            self.flag_size,
            self.max_bits,
            codec_id,
            self.count,
            self.total,
        )
        return header + self.value_bytes + self.key_bytes

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedGradient":
        flag_size, max_bits, codec_id, count, total, body = parse_header(data)
        if codec_id != CODEC_ID_FASTSGD:
            raise CorruptPayloadError(f"unexpected codec id {codec_id}")
        if len(body) < count:
            raise CorruptPayloadError(
                f"value section truncated at byte offset {HEADER_SIZE + len(body)}: "
                f"need {count} value bytes, have {len(body)}"
            )
        return cls(
            total=total,
            count=count,
            max_bits=max_bits,
            flag_size=flag_size,
            value_bytes=bytes(body[:count]),
            key_bytes=bytes(body[count:]),
        )


def parse_header(data: bytes) -> tuple[int, int, int, int, float, bytes]:
    """Split a framed payload into (l, M, codec_id, d, total, body)."""
    if len(data) < HEADER_SIZE:
        raise CorruptPayloadError(
            f"payload is {len(data)} bytes, shorter than the {HEADER_SIZE}-byte header"
        )
    magic, version, flag_size, max_bits, codec_id, count, total = _HEADER.unpack_from(data)
    if magic != WIRE_MAGIC:
        raise CorruptPayloadError(f"bad magic {magic!r} at byte offset 0")
    if version != WIRE_VERSION:
        raise CorruptPayloadError(f"unsupported version {version} at byte offset 4")
    return flag_size, max_bits, codec_id, count, total, data[HEADER_SIZE:]


def reciprocal_map(value: float, total: float) -> float:
    """Map a gradient value to total / |value|, which is always >= 1."""
    if value == 0.0:
        raise ValueError("cannot map a zero gradient value")
    if not total > 0.0:
        raise ValueError(f"sum of magnitudes must be positive, got {total}")
    return total / abs(value)


def _pow(base: float, exponent: float) -> float:
    try:
        return base ** exponent
    except OverflowError:
        return math.inf


def log_quantize(reciprocal: float, base: float) -> int:
    """Smallest integer L with base**L >= reciprocal (the ceiling of log_base).

    The float logarithm is corrected afterwards so exact powers of the base
    never land one level off.
    """
    if not reciprocal >= 1.0:
        raise ValueError(f"reciprocal value must be >= 1, got {reciprocal}")
    if not base > 1.0:
        raise ValueError(f"base must be > 1, got {base}")
    if reciprocal == 1.0:
        return 0
    level = max(int(math.ceil(math.log(reciprocal) / math.log(base))), 0)
    slack = reciprocal * (1.0 - _LOG_SLACK)
    if level > 0 and _pow(base, level - 1) >= slack:
        level -= 1
    if _pow(base, level) < slack:
        level += 1
    return level


def _quantize_levels(reciprocals: np.ndarray, base: float) -> np.ndarray:
    """Vectorized log_quantize. Levels are clipped to int64 range before cast."""
    with np.errstate(over="ignore", divide="ignore"):
        raw = np.ceil(np.log(reciprocals) / math.log(base))
        levels = np.clip(raw, 0, 2**62).astype(np.int64)
        slack = reciprocals * (1.0 - _LOG_SLACK)
        down = base ** (levels.astype(np.float64) - 1.0)
        levels = np.where((levels > 0) & (down >= slack), levels - 1, levels)
        cur = base ** levels.astype(np.float64)
        levels = np.where(cur < slack, levels + 1, levels)
    return levels


class ValueEncoding(NamedTuple):
    """Retained entries after quantization and filtering, plus the magnitude sum."""

    keys: np.ndarray       # strictly increasing, in input order
    levels: np.ndarray     # quantized magnitudes, each <= threshold
    negative: np.ndarray   # sign of the original values
    total: float


def encode_values(grad: SparseGradient, cfg: CodecConfig) -> ValueEncoding:
    """Quantize all values, keep those at or below the threshold level.

    The magnitude sum covers every input entry, filtered ones included, so
    the decoder sees the same reciprocal scale the encoder used.
    """
    if grad.nnz == 0:
        raise ValueError("cannot encode an empty gradient")
    magnitudes = np.abs(grad.values)
    total = float(np.sum(magnitudes))
    reciprocals = total / magnitudes
    levels = _quantize_levels(reciprocals, cfg.base)
    keep = levels <= cfg.threshold
    return ValueEncoding(
        keys=grad.keys[keep],
        levels=levels[keep],
        negative=grad.values[keep] < 0,
        total=total,
    )


def decode_value(level: int, sign: int, total: float, base: float) -> float:
    """Recover sign * total / base**level; never exceeds the original magnitude."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    if not total > 0.0:
        raise ValueError(f"sum of magnitudes must be positive, got {total}")
    magnitude = total / base ** level
    return -magnitude if sign < 0 else magnitude


def delta_encode(keys) -> tuple[np.ndarray, int]:
    """Differences against the previous key, starting from an implicit 0."""
    keys = np.asarray(keys, dtype=np.int64)
    if keys.size == 0:
        raise ValueError("cannot delta-encode an empty key list")
    deltas = np.diff(keys, prepend=np.int64(0))
    if keys[0] < 0 or np.any(deltas[1:] <= 0):
        raise ValueError("keys must be non-negative and strictly increasing")
    return deltas, int(deltas.max())


def length_levels(max_bits: int, flag_size: int) -> list[int]:
    """Payload widths selectable by a flag: ceil(i * M / 2^l) for i = 1..2^l."""
    if max_bits < 1:
        raise ValueError(f"max_bits must be >= 1, got {max_bits}")
    if not 1 <= flag_size <= 5:
        raise ValueError(f"flag_size must be in [1, 5], got {flag_size}")
    n = 1 << flag_size
    return [-(-i * max_bits // n) for i in range(1, n + 1)]


def encode_keys(keys, flag_size: int) -> tuple[bytes, int]:
    """Bit-pack delta keys, each prefixed by a flag picking its payload width.

    M is the bit length of the largest delta (at least 1, so a lone leading
    delta of 0 still gets a payload bit).  Returns the packed bytes and M.
    """
    deltas, max_delta = delta_encode(keys)
    max_bits = max(max_delta.bit_length(), 1)
    widths = length_levels(max_bits, flag_size)
    writer = BitWriter()
    write = writer.write_bits
    for delta in deltas.tolist():
        flag = bisect_left(widths, delta.bit_length())
        write(flag, flag_size)
        write(delta, widths[flag])
    return writer.getvalue(), max_bits


def decode_keys(key_bytes: bytes, count: int, max_bits: int, flag_size: int) -> np.ndarray:
    """Inverse of encode_keys given the record count and max delta bits."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    widths = length_levels(max_bits, flag_size)
    reader = BitReader(key_bytes)
    read = reader.read_bits
    keys = np.empty(count, dtype=np.int64)
    key = 0
    for j in range(count):
        flag = read(flag_size)
        delta = read(widths[flag])
        if delta == 0 and j > 0:
            raise CorruptPayloadError(
                f"zero delta at record {j}: decoded keys are not strictly increasing"
            )
        key += delta
        keys[j] = key
    if reader.bits_remaining >= 8:
        raise CorruptPayloadError(
            f"{reader.bits_remaining} bits left after {count} records; expected < 8 padding bits"
        )
    return keys


def compress(grad: SparseGradient, cfg: CodecConfig) -> CompressedGradient:
    """Full encoder: values first, then the keys of the retained entries."""
    enc = encode_values(grad, cfg)
    value_bytes = bytes(
        (0x80 | level) if neg else level
        for level, neg in zip(enc.levels.tolist(), enc.negative.tolist())
    )
    if enc.keys.size:
        key_bytes, max_bits = encode_keys(enc.keys, cfg.flag_size)
    else:
        key_bytes, max_bits = b"", 0
    return CompressedGradient(
        total=enc.total,
        count=int(enc.keys.size),
        max_bits=max_bits,
        flag_size=cfg.flag_size,
        value_bytes=value_bytes,
        key_bytes=key_bytes,
    )


def decompress(comp: CompressedGradient, cfg: CodecConfig, dimension: int) -> SparseGradient:
    """Full decoder: keys exactly, values underestimated by at most a factor of b."""
    if comp.count == 0:
        return SparseGradient(np.empty(0, dtype=np.int64), np.empty(0), dimension)
    keys = decode_keys(comp.key_bytes, comp.count, comp.max_bits, comp.flag_size)
    if keys[-1] >= dimension:
        raise CorruptPayloadError(
            f"decoded key {int(keys[-1])} out of range for dimension {dimension}"
        )
    raw = np.frombuffer(comp.value_bytes, dtype=np.uint8)
    if raw.size != comp.count:
        raise CorruptPayloadError(
            f"expected {comp.count} value bytes, found {raw.size}"
        )
    levels = (raw & 0x7F).astype(np.float64)
    signs = np.where(raw & 0x80, -1.0, 1.0)
    values = signs * (comp.total / cfg.base ** levels)
    return SparseGradient(keys, values, dimension)
