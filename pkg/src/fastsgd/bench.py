"""Standalone codec benchmark on synthetic gradients."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .baselines import make_codec
from .codec import CodecConfig
from .distsim import UNCOMPRESSED_BITS_PER_ENTRY
from .synth import synthetic_gradient


@dataclass(frozen=True)
class BenchResult:
    codec: str
    entries: int
    encode_ns_per_entry: float
    decode_ns_per_entry: float
    compression_ratio: float


def bench_codec(kind: str, entries: int, dimension: int, seed: int = 0,
                distribution: str = "lognormal", repeats: int = 3,
                cfg: CodecConfig | None = None,
                topk_k: float | int = 0.001) -> BenchResult:
    """Median encode/decode time per entry and ratio vs the 64-bit baseline."""
    grad = synthetic_gradient(entries, dimension, seed, distribution)
    codec = make_codec(kind, cfg, topk_k=topk_k)
    encode_times = []
    decode_times = []
    payload = b""
    for _ in range(repeats):
        t0 = time.perf_counter()
        payload = codec.encode(grad)
        t1 = time.perf_counter()
        codec.decode(payload, dimension)
        t2 = time.perf_counter()
        encode_times.append(t1 - t0)
        decode_times.append(t2 - t1)
    encode_times.sort()
    decode_times.sort()
    median_encode = encode_times[len(encode_times) // 2]
    median_decode = decode_times[len(decode_times) // 2]
    ratio = (UNCOMPRESSED_BITS_PER_ENTRY * grad.nnz) / (8 * len(payload))
    return BenchResult(
        codec=kind,
        entries=grad.nnz,
        encode_ns_per_entry=1e9 * median_encode / grad.nnz,
        decode_ns_per_entry=1e9 * median_decode / grad.nnz,
        compression_ratio=ratio,
    )


def format_table(results: list[BenchResult]) -> str:
    header = f"{'codec':<10} {'entries':>9} {'enc ns/entry':>13} {'dec ns/entry':>13} {'ratio':>9}"
    lines = [header, "-" * len(header)]
    for r in results:
        lines.append(
            f"{r.codec:<10} {r.entries:>9} {r.encode_ns_per_entry:>13.1f} "
            f"{r.decode_ns_per_entry:>13.1f} {r.compression_ratio:>9.2f}"
        )
    return "\n".join(lines)
