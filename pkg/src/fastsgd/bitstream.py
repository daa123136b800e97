"""Append-only bit writer and sequential bit reader, MSB-first within each byte."""

from __future__ import annotations


class TruncatedStreamError(Exception):
    """Raised when a read runs past the end of the bit buffer."""


class BitWriter:
    """Accumulates bits MSB-first; the final partial byte is zero-padded."""

    __slots__ = ("_buf", "_acc", "_nacc")

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0      # pending bits, fewer than 8
        self._nacc = 0

    @property
    def bit_cursor(self) -> int:
        return len(self._buf) * 8 + self._nacc

    def write_bits(self, value: int, width: int) -> None:
        if not 0 <= width <= 64:
            raise ValueError(f"width must be in [0, 64], got {width}")
        if value < 0 or value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        if width == 0:
            return
        acc = (self._acc << width) | value
        nacc = self._nacc + width
        buf = self._buf
        while nacc >= 8:
            nacc -= 8
            buf.append((acc >> nacc) & 0xFF)
        self._acc = acc & ((1 << nacc) - 1)
        self._nacc = nacc

    def getvalue(self) -> bytes:
        """Buffer contents with the trailing partial byte padded with zero bits."""
        if self._nacc:
            return bytes(self._buf) + bytes([self._acc << (8 - self._nacc)])
        return bytes(self._buf)


class BitReader:
    """Sequential MSB-first reader over a byte buffer."""

    __slots__ = ("_data", "_pos", "_nbits")

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._nbits = len(data) * 8

    @property
    def bit_cursor(self) -> int:
        return self._pos

    @property
    def bits_remaining(self) -> int:
        return self._nbits - self._pos

    def read_bits(self, width: int) -> int:
        if not 0 <= width <= 64:
            raise ValueError(f"width must be in [0, 64], got {width}")
        if width == 0:
            return 0
        pos = self._pos
        if pos + width > self._nbits:
            raise TruncatedStreamError(
                f"requested {width} bits at bit {pos}, only {self._nbits - pos} remain"
            )
        data = self._data
        result = 0
        remaining = width
        while remaining:
            byte_i, bit_i = divmod(pos, 8)
            take = min(8 - bit_i, remaining)
            chunk = (data[byte_i] >> (8 - bit_i - take)) & ((1 << take) - 1)
            result = (result << take) | chunk
            pos += take
            remaining -= take
        self._pos = pos
        return result
