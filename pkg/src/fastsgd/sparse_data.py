"""Sparse instance/label datasets: LIBSVM ingestion, splitting, partitioning."""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class LibsvmFormatError(Exception):
    """Malformed LIBSVM input; the message carries the offending line number."""


@dataclass(frozen=True)
class Instance:
    """One training example: a sparse feature vector and its label."""

    keys: np.ndarray     # strictly increasing, 0-based
    values: np.ndarray
    label: float


@dataclass(frozen=True)
class Dataset:
    instances: tuple[Instance, ...]
    dimension: int
    name: str = ""

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class Shard:
    """The slice of instance indices owned by one worker."""

    owner: int
    indices: np.ndarray


def _map_label(token: str, line_no: int, classification: bool) -> float:
    if classification:
        if token in ("+1", "1"):
            return 1.0
        if token in ("-1", "0"):
            return -1.0
        raise LibsvmFormatError(
            f"line {line_no}: label {token!r} is not one of +1/1/-1/0"
        )
    try:
        return float(token)
    except ValueError:
        raise LibsvmFormatError(f"line {line_no}: non-numeric label {token!r}") from None


def parse_libsvm(source, classification: bool = True, name: str = "",
                 dimension: int | None = None) -> Dataset:
    """Read LIBSVM text: one "<label> <key:value> ..." instance per line.

    Keys are 1-based in the file and converted to 0-based.  ``source`` may
    be a path (``.gz`` transparently decompressed), a text stream, or an
    iterable of lines.  The dataset dimension defaults to 1 + the largest
    key seen; pass ``dimension`` to widen it.
    """
    close = None
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        opener = gzip.open if str(source).endswith(".gz") else open
        source = close = opener(source, "rt")
    try:
        instances = []
        max_key = -1
        for line_no, line in enumerate(source, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            label = _map_label(tokens[0], line_no, classification)
            keys = np.empty(len(tokens) - 1, dtype=np.int64)
            values = np.empty(len(tokens) - 1, dtype=np.float64)
            prev = -1
            for i, token in enumerate(tokens[1:]):
                try:
                    key_str, _, val_str = token.partition(":")
                    key = int(key_str) - 1
                    value = float(val_str)
                except ValueError:
                    raise LibsvmFormatError(
                        f"line {line_no}: malformed feature token {token!r}"
                    ) from None
                if key <= prev:
                    raise LibsvmFormatError(
                        f"line {line_no}: feature keys not strictly increasing at {token!r}"
                    )
                prev = key
                keys[i] = key
                values[i] = value
            if keys.size and keys[0] < 0:
                raise LibsvmFormatError(f"line {line_no}: feature key below 1")
            max_key = max(max_key, prev)
            instances.append(Instance(keys, values, label))
        if not instances:
            raise LibsvmFormatError("empty input: no instances found")
    finally:
        if close is not None:
            close.close()
    min_dim = max_key + 1 if max_key >= 0 else 1
    if dimension is None:
        dimension = max(min_dim, 1)
    elif dimension < min_dim:
        raise ValueError(f"dimension {dimension} smaller than 1 + max key {max_key}")
    return Dataset(tuple(instances), dimension, name)


def write_libsvm(ds: Dataset, stream: io.TextIOBase) -> None:
    """Serialize back to LIBSVM text (keys re-based to 1)."""
    for inst in ds.instances:
        label = inst.label
        parts = ["%d" % label if label == int(label) else repr(label)]
        parts += [f"{k + 1}:{repr(v)}" for k, v in zip(inst.keys.tolist(), inst.values.tolist())]
        stream.write(" ".join(parts) + "\n")


def _subset(ds: Dataset, indices: Iterable[int], suffix: str) -> Dataset:
    picked = tuple(ds.instances[i] for i in indices)
    return Dataset(picked, ds.dimension, f"{ds.name}{suffix}" if ds.name else "")


def train_test_split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then a head/tail split (e.g. 0.7 for a 70/30 split)."""
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(ds))
    cut = int(train_fraction * len(ds))
    return _subset(ds, order[:cut], "-train"), _subset(ds, order[cut:], "-test")


def partition(ds: Dataset, workers: int, seed: int) -> list[Shard]:
    """Deterministic shuffle then round-robin; shard sizes differ by at most 1."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers > len(ds):
        raise ValueError(f"cannot spread {len(ds)} instances over {workers} workers")
    order = np.random.default_rng(seed).permutation(len(ds))
    return [Shard(w, order[w::workers]) for w in range(workers)]
