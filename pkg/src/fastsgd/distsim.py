"""Synchronous data-parallel training loop with simulated communication.

Workers compute gradients on their shard sub-batches, encode them, and the
driver decodes, averages, and applies one Adam step per round.  No sockets:
communication volume is accounted by payload byte length.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import make_codec
from .codec import CodecConfig, SparseGradient
from .models import Model, ModelKind, batch_gradient, predict_loss
from .optimizer import AdamConfig, AdamState, adam_step
from .sparse_data import Dataset, partition, train_test_split

# Per-entry size of an uncompressed gradient: 4-byte integer key plus
# 4-byte float value.
UNCOMPRESSED_BITS_PER_ENTRY = 64

# Columns of the per-round metrics CSV.  Timings are excluded on purpose:
# the CSV must be byte-identical across same-seed runs, and wall-clock
# durations are not; they are reported in the JSON summary instead.
CSV_COLUMNS = (
    "epoch",
    "batch",
    "train_loss",
    "validation_loss",
    "uncompressed_bits",
    "compressed_bits",
)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelKind = ModelKind.LOGISTIC
    lam: float = 0.01
    codec: str = "fastsgd"
    codec_cfg: CodecConfig = field(default_factory=CodecConfig)
    topk_k: float = 0.001
    workers: int = 1
    batch_fraction: float = 0.10
    epochs: int = 20
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    train_fraction: float = 0.7
    compress_broadcast: bool = False

    def __post_init__(self):
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ValueError(f"batch_fraction must be in (0, 1], got {self.batch_fraction}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class RoundMetrics:
    epoch: int
    batch: int
    train_loss: float
    validation_loss: float
    uncompressed_bits: int
    compressed_bits: int
    compute_time: float
    encode_time: float
    decode_time: float
    update_time: float


def aggregate(grads: list[SparseGradient]) -> SparseGradient:
    """Coordinate-wise mean over the workers; absent keys contribute zero."""
    if not grads:
        raise ValueError("nothing to aggregate")
    dimension = grads[0].dimension
    if any(g.dimension != dimension for g in grads):
        raise ValueError("gradients disagree on dimension")
    keys = np.concatenate([g.keys for g in grads])
    vals = np.concatenate([g.values for g in grads])
    union, inverse = np.unique(keys, return_inverse=True)
    summed = np.zeros(union.size)
    np.add.at(summed, inverse, vals)
    return SparseGradient(union, summed / len(grads), dimension)


def run_training(ds: Dataset, cfg: TrainConfig) -> tuple[list[RoundMetrics], np.ndarray]:
    """Train on a seeded 70/30 split of ``ds``; returns round metrics and theta.

    The run is bit-reproducible for a fixed (dataset, config): all sampling
    comes from one seeded generator, and gradient math is deterministic.
    """
    train, test = train_test_split(ds, cfg.train_fraction, cfg.seed)
    if cfg.workers > len(train):
        raise ValueError(f"{cfg.workers} workers but only {len(train)} training instances")
    shards = partition(train, cfg.workers, cfg.seed)
    model = Model(cfg.model, cfg.lam)
    codec = make_codec(cfg.codec, cfg.codec_cfg, topk_k=cfg.topk_k)
    theta = np.zeros(ds.dimension)
    state = AdamState.zeros(ds.dimension)
    rng = np.random.default_rng(cfg.seed)
    batches_per_epoch = int(np.ceil(1.0 / cfg.batch_fraction))

    metrics: list[RoundMetrics] = []
    for epoch in range(cfg.epochs):
        # fresh without-replacement order per worker per epoch
        orders = [rng.permutation(shard.indices) for shard in shards]
        chunks = [np.array_split(order, batches_per_epoch) for order in orders]
        for batch_idx in range(batches_per_epoch):
            payloads = []
            round_loss = 0.0
            round_examples = 0
            raw_bits = 0
            t_compute = t_encode = 0.0
            for w in range(cfg.workers):
                idx = chunks[w][batch_idx]
                if idx.size == 0:
                    continue
                batch = [train.instances[i] for i in idx]
                t0 = time.perf_counter()
                grad, loss = batch_gradient(model, theta, batch)
                t1 = time.perf_counter()
                payload = codec.encode(grad)
                t2 = time.perf_counter()
                t_compute += t1 - t0
                t_encode += t2 - t1
                payloads.append(payload)
                round_loss += loss
                round_examples += idx.size
                raw_bits += UNCOMPRESSED_BITS_PER_ENTRY * grad.nnz
            if not payloads:
                continue
            sent_bits = sum(8 * len(p) for p in payloads)

            t0 = time.perf_counter()
            decoded = [codec.decode(p, ds.dimension) for p in payloads]
            t1 = time.perf_counter()
            agg = aggregate(decoded)
            if cfg.compress_broadcast and agg.nnz:
                # the driver->worker broadcast reuses the same codec, once
                # per worker replica
                payload = codec.encode(agg)
                sent_bits += cfg.workers * 8 * len(payload)
                raw_bits += cfg.workers * UNCOMPRESSED_BITS_PER_ENTRY * agg.nnz
                agg = codec.decode(payload, ds.dimension)
            t2 = time.perf_counter()
            adam_step(state, theta, agg, cfg.adam)
            t3 = time.perf_counter()

            metrics.append(RoundMetrics(
                epoch=epoch,
                batch=batch_idx,
                train_loss=round_loss / round_examples,
                validation_loss=predict_loss(model, theta, test.instances),
                uncompressed_bits=raw_bits,
                compressed_bits=sent_bits,
                compute_time=t_compute,
                encode_time=t_encode,
                decode_time=t1 - t0,
                update_time=t3 - t2,
            ))
    return metrics, theta


def epoch_report(metrics: list[RoundMetrics]) -> dict:
    """Aggregate round metrics into the run summary."""
    if not metrics:
        raise ValueError("no rounds recorded")
    epochs = sorted({m.epoch for m in metrics})
    loss_curve = []
    for e in epochs:
        rounds = [m for m in metrics if m.epoch == e]
        loss_curve.append(rounds[-1].validation_loss)
    total_compressed = sum(m.compressed_bits for m in metrics)
    total_uncompressed = sum(m.uncompressed_bits for m in metrics)
    breakdown = {
        name: sum(getattr(m, name) for m in metrics)
        for name in ("compute_time", "encode_time", "decode_time", "update_time")
    }
    total_time = sum(breakdown.values())
    return {
        "epochs": len(epochs),
        "rounds": len(metrics),
        "avg_epoch_time_s": total_time / len(epochs),
        "total_message_bytes": total_compressed // 8,
        "compression_ratio": total_uncompressed / total_compressed,
        "final_validation_loss": metrics[-1].validation_loss,
        "loss_curve": loss_curve,
        "time_breakdown_s": breakdown,
    }


def write_metrics_csv(metrics: list[RoundMetrics], path) -> None:
    """One row per round; deterministic columns only (see CSV_COLUMNS)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for m in metrics:
            writer.writerow([
                m.epoch,
                m.batch,
                repr(m.train_loss),
                repr(m.validation_loss),
                m.uncompressed_bits,
                m.compressed_bits,
            ])


def write_summary_json(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
