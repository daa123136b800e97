"""Command-line entry point: training runs, codec benchmarks, payload inspection.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable/malformed dataset or payload).
"""

from __future__ import annotations

import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click

from . import baselines, codec as codec_mod
from .bench import bench_codec, format_table
from .codec import CodecConfig, CorruptPayloadError, HEADER_SIZE
from .bitstream import TruncatedStreamError
from .distsim import (
    TrainConfig,
    epoch_report,
    run_training,
    write_metrics_csv,
    write_summary_json,
)
from .models import ModelKind
from .optimizer import AdamConfig
from .sparse_data import LibsvmFormatError, parse_libsvm


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# Train settings: one entry per flag, with the built-in default.  Config-file
# keys use the same names.
TRAIN_DEFAULTS = {
    "model": "lr",
    "codec": "fastsgd",
    "workers": 1,
    "epochs": 20,
    "batch_fraction": 0.10,
    "seed": 0,
    "lam": 0.01,
    "lr": 0.01,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "base": 1.1,
    "tau": 127,
    "flag_size": 2,
    "topk_k": 0.001,
    "compress_broadcast": False,
}


def load_config_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            values = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    unknown = set(values) - set(TRAIN_DEFAULTS)
    if unknown:
        raise ConfigError(
            f"config file {path} has unknown keys: {', '.join(sorted(unknown))}"
        )
    return values


def resolve_train_settings(file_values: dict, flag_values: dict) -> dict:
    """Merge with precedence flag > file > default; flags set to None are unset."""
    settings = dict(TRAIN_DEFAULTS)
    settings.update(file_values)
    settings.update({k: v for k, v in flag_values.items() if v is not None})
    return settings


def build_train_config(settings: dict) -> TrainConfig:
    if settings["codec"] not in ("fastsgd", "identity", "topk", "logquant"):
        raise ConfigError(f"unknown codec {settings['codec']!r}")
    try:
        return TrainConfig(
            model=ModelKind(settings["model"]),
            lam=settings["lam"],
            codec=settings["codec"],
            codec_cfg=CodecConfig(
                base=settings["base"],
                threshold=settings["tau"],
                flag_size=settings["flag_size"],
            ),
            topk_k=settings["topk_k"],
            workers=settings["workers"],
            batch_fraction=settings["batch_fraction"],
            epochs=settings["epochs"],
            adam=AdamConfig(
                lr=settings["lr"],
                beta1=settings["beta1"],
                beta2=settings["beta2"],
                eps=settings["eps"],
            ),
            seed=settings["seed"],
            compress_broadcast=settings["compress_broadcast"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@click.group()
def cli():
    """Compressed-gradient codec and data-parallel training simulator."""


@cli.command()
@click.option("--data", "data_path", required=True, help="LIBSVM dataset path (.gz ok).")
@click.option("--out", "out_dir", default=".", show_default=True,
              help="Directory for metrics.csv and summary.json.")
@click.option("--config", "config_path", default=None, help="TOML config file.")
@click.option("--model", type=click.Choice(["linear", "lr", "svm"]), default=None)
@click.option("--codec", type=click.Choice(["fastsgd", "identity", "topk", "logquant"]),
              default=None)
@click.option("--workers", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lam", type=float, default=None, help="L2 regularizer.")
@click.option("--lr", type=float, default=None, help="Adam learning rate.")
@click.option("--beta1", type=float, default=None)
@click.option("--beta2", type=float, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--base", type=float, default=None, help="Quantization base b.")
@click.option("--tau", type=int, default=None, help="Filter threshold (1..127).")
@click.option("--flag-size", type=int, default=None, help="Length-flag bits (1..5).")
@click.option("--topk-k", type=float, default=None,
              help="Top-k count (>=1) or fraction of the dimension.")
@click.option("--compress-broadcast/--no-compress-broadcast", default=None)
def train(data_path, out_dir, config_path, **flags):
    """Run a data-parallel training simulation and write metrics."""
    file_values = load_config_file(config_path) if config_path else {}
    if flags.get("topk_k") is not None and flags["topk_k"] >= 1:
        flags["topk_k"] = int(flags["topk_k"])
    settings = resolve_train_settings(file_values, flags)
    cfg = build_train_config(settings)

    if not Path(data_path).exists():
        raise DataError(f"dataset file not found: {data_path}")
    classification = cfg.model in (ModelKind.LOGISTIC, ModelKind.SVM)
    try:
        ds = parse_libsvm(data_path, classification=classification,
                          name=Path(data_path).name)
    except LibsvmFormatError as exc:
        raise DataError(f"{data_path}: {exc}") from exc

    try:
        metrics, _theta = run_training(ds, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    summary = epoch_report(metrics)
    summary["settings"] = {k: settings[k] for k in sorted(settings)}

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(metrics, out / "metrics.csv")
    write_summary_json(summary, out / "summary.json")

    per_epoch = {}
    for m in metrics:
        per_epoch[m.epoch] = m.validation_loss
    for epoch, loss in per_epoch.items():
        click.echo(f"epoch {epoch:3d}  validation loss {loss:.6f}")
    click.echo(f"compression ratio {summary['compression_ratio']:.2f}")
    click.echo(f"wrote {out / 'metrics.csv'} and {out / 'summary.json'}")


@cli.command("bench-codec")
@click.option("--codec", "codecs", multiple=True,
              type=click.Choice(["fastsgd", "identity", "topk", "logquant"]),
              help="Codec(s) to bench; default all.")
@click.option("--entries", type=int, default=100_000, show_default=True)
@click.option("--dimension", type=int, default=10_000_000, show_default=True)
@click.option("--dist", type=click.Choice(["lognormal", "uniform"]),
              default="lognormal", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--repeats", type=int, default=3, show_default=True)
@click.option("--base", type=float, default=1.1, show_default=True)
@click.option("--tau", type=int, default=127, show_default=True)
@click.option("--flag-size", type=int, default=2, show_default=True)
def bench_codec_cmd(codecs, entries, dimension, dist, seed, repeats, base, tau, flag_size):
    """Benchmark codecs on a deterministic synthetic gradient."""
    try:
        cfg = CodecConfig(base=base, threshold=tau, flag_size=flag_size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not codecs:
        codecs = ("fastsgd", "identity", "topk", "logquant")
    results = [
        bench_codec(kind, entries, dimension, seed=seed,
                    distribution=dist, repeats=repeats, cfg=cfg)
        for kind in codecs
    ]
    click.echo(format_table(results))


def format_inspection(data: bytes, max_entries: int = 10,
                      base: float = 1.1) -> str:
    """Human-readable dump of a framed compressed-gradient payload."""
    flag_size, max_bits, codec_id, count, total, body = codec_mod.parse_header(data)
    names = {0: "fastsgd", 1: "identity", 2: "topk", 3: "logquant"}
    lines = [
        f"magic       FSGD  version 1",
        f"codec       {names.get(codec_id, f'unknown ({codec_id})')}",
        f"flag_size l {flag_size}",
        f"max_bits M  {max_bits}",
        f"entries d   {count}",
        f"sum |v|     {total!r}",
        f"header      {HEADER_SIZE * 8} bits",
    ]
    if codec_id == baselines.CODEC_ID_FASTSGD:
        lines.append(f"value bytes {count * 8} bits")
        lines.append(f"key bytes   {(len(body) - count) * 8} bits")
    else:
        lines.append(f"body        {len(body) * 8} bits")
    grad = baselines.decode_payload(data, 2**62, CodecConfig(base=base))
    shown = min(max_entries, grad.nnz)
    lines.append(f"first {shown} decoded entries:")
    for k, v in zip(grad.keys[:shown].tolist(), grad.values[:shown].tolist()):
        lines.append(f"  {k}: {v!r}")
    return "\n".join(lines)


@cli.command()
@click.argument("path")
@click.option("--entries", type=int, default=10, show_default=True,
              help="How many decoded entries to print.")
@click.option("--base", type=float, default=1.1, show_default=True,
              help="Quantization base used at encode time (fastsgd payloads).")
def inspect(path, entries, base):
    """Dump the header and first entries of a compressed-gradient file."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        click.echo(format_inspection(data, entries, base))
    except (CorruptPayloadError, TruncatedStreamError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:      # --help and friends
        return exc.exit_code
    except click.Abort:
        return 1
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (LibsvmFormatError, CorruptPayloadError, TruncatedStreamError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
