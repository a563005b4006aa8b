"""Command-line entry point.

One binary, subcommand style. Flags override environment variables
(YCD_ADDR, YCD_MODEL), which override defaults. Exit codes: 0 success,
1 runtime failure, 2 usage error (argparse's own convention).

Every run prints a reproducibility line carrying the seed in effect and a
sha256 digest of the fully resolved configuration, so two runs can be
compared without diffing flag spellings.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import data as data_mod
from . import model as model_mod
from . import train as train_mod
from .arch import build_arch
from .costs import count_costs
from .model import BundleError
from .serve import ServiceConfig
from .tensor import Tensor

DEFAULT_ADDR = "127.0.0.1:8000"
BENCH_WARMUP = 5  # documented: excluded from reported statistics


class CliError(RuntimeError):
    """Command failed; message goes to stderr, exit code 1."""


def _resolved_config(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _print_reproducibility(args: argparse.Namespace) -> None:
    cfg = _resolved_config(args)
    digest = hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()
    seed = cfg.get("seed", "-")
    print(f"reproducibility: seed={seed} config-digest=sha256:{digest[:16]}")


def _check_overwrite(path: str, force: bool) -> None:
    if force:
        return
    p = Path(path)
    if p.is_file() or (p.is_dir() and any(p.iterdir())):
        raise CliError(f"refusing to overwrite {path} (pass --force)")


def _env_or(value, env_name: str, default=None):
    if value is not None:
        return value
    env = os.environ.get(env_name)
    return env if env else default


def _require_model_path(args) -> str:
    path = _env_or(getattr(args, "model", None), "YCD_MODEL")
    if not path:
        raise CliError("no model bundle given (pass --model or set YCD_MODEL)")
    return path


def _parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise CliError(f"bad address {addr!r}, expected host:port")
    return host, int(port)


# ---------------------------------------------------------------- commands


def _cmd_dataset_scan(args) -> int:
    manifest = data_mod.scan_dataset(args.root)
    print(f"classes: {len(manifest.classes)}")
    for label in manifest.classes:
        n = sum(1 for e in manifest.entries if e.label == label)
        print(f"  {label}: {n} images")
    print(f"total: {len(manifest.entries)} images")
    return 0


def _cmd_dataset_split(args) -> int:
    _check_overwrite(args.out, args.force)
    manifest = data_mod.scan_dataset(args.root)
    if args.test_count is not None:
        policy = data_mod.SplitPolicy("count", args.test_count)
    elif args.test_fraction is not None:
        policy = data_mod.SplitPolicy("fraction", args.test_fraction)
    else:
        policy = data_mod.SplitPolicy("auto")
    manifest = data_mod.split_manifest(manifest, policy, args.seed)
    data_mod.save_manifest(manifest, args.out)
    counts = manifest.counts()
    for label in manifest.classes:
        c = counts[label]
        print(f"  {label}: train={c[data_mod.TRAIN]} test={c[data_mod.TEST]}")
    print(f"manifest written to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    _check_overwrite(args.out, args.force)
    manifest = data_mod.generate_synthetic_dataset(
        args.out,
        k_classes=args.classes,
        n_per_class=args.per_class,
        resolution=args.resolution,
        seed=args.seed,
    )
    print(f"wrote {len(manifest.entries)} images across "
          f"{len(manifest.classes)} classes under {args.out}")
    return 0


def _cmd_train(args) -> int:
    _check_overwrite(args.out, args.force)
    manifest = data_mod.scan_dataset(args.data)
    manifest = data_mod.split_manifest(
        manifest, data_mod.SplitPolicy("auto"), args.seed
    )
    arch = build_arch(args.alpha, args.rho, base_resolution=args.resolution)
    cfg = train_mod.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        momentum=args.momentum,
        shuffle_seed=args.seed,
    )
    result = train_mod.train_bundle(manifest, arch, cfg, init_seed=args.seed)
    for path, reason in result.train_failures + result.test_failures:
        print(f"warning: skipped {path}: {reason}", file=sys.stderr)
    model_mod.save_bundle(result.bundle, args.out)
    metrics_path = args.metrics_out or str(Path(args.out).with_suffix(".metrics.csv"))
    if metrics_path != args.out:
        _check_overwrite(metrics_path, args.force)
    train_mod.write_metrics_csv(result.metrics, metrics_path)
    last = result.metrics[-1]
    test_part = ""
    if last.test_accuracy is not None:
        test_part = f" test_acc={last.test_accuracy:.4f}"
    print(f"epoch {last.epoch}: loss={last.loss:.6f} "
          f"train_acc={last.train_accuracy:.4f}{test_part}")
    print(f"bundle written to {args.out}")
    print(f"metrics written to {metrics_path}")
    return 0


def _cmd_eval(args) -> int:
    bundle = model_mod.load_bundle(_require_model_path(args))
    manifest = data_mod.load_manifest(args.manifest) if args.manifest else None
    if manifest is None:
        if not args.data:
            raise CliError("pass --data or --manifest")
        manifest = data_mod.scan_dataset(args.data)
        manifest = data_mod.split_manifest(
            manifest, data_mod.SplitPolicy("auto"), args.seed
        )
    report = train_mod.evaluate(bundle, manifest, args.split)
    print("label        accuracy  samples")
    for row in report.per_class:
        acc = "-" if row.accuracy is None else f"{row.accuracy:.2f}"
        print(f"{row.label:<12} {acc:>8}  {row.samples:>7}")
    total = sum(r.samples for r in report.per_class)
    print(f"{'overall':<12} {report.overall_accuracy:>8.2f}  {total:>7}")
    if args.out:
        _check_overwrite(args.out, args.force)
        train_mod.write_eval_json(report, args.out)
        print(f"report written to {args.out}")
    return 0


def _cmd_classify(args) -> int:
    bundle = model_mod.load_bundle(_require_model_path(args))
    started = time.perf_counter()
    image = data_mod.load_and_preprocess(
        args.image, bundle.arch.effective_resolution
    )
    _, probs = model_mod.forward(bundle, image)
    latency_ms = (time.perf_counter() - started) * 1000.0
    order = np.argsort(-probs, kind="stable")
    if args.top_k is not None:
        order = order[: args.top_k]
    for i in order:
        print(f"{bundle.labels[i]:<12} {probs[i]:.6f}")
    print(f"latency_ms: {latency_ms:.3f}")
    return 0


def _layer_detail(layer) -> str:
    from . import arch as arch_mod

    if layer.kind in (arch_mod.STANDARD_CONV, arch_mod.DEPTHWISE_CONV,
                      arch_mod.POINTWISE_CONV):
        return (f"{layer.kernel_size}x{layer.kernel_size}/{layer.stride} "
                f"{layer.in_channels}->{layer.out_channels}")
    if layer.kind in (arch_mod.SCALE_BIAS, arch_mod.ACTIVATION):
        return f"{layer.in_channels}ch"
    return ""


def _cmd_info(args) -> int:
    if getattr(args, "model", None) or os.environ.get("YCD_MODEL"):
        bundle = model_mod.load_bundle(_require_model_path(args))
        arch = bundle.arch
        report = bundle.cost_report()
        print(f"labels: {', '.join(bundle.labels)}")
        print(f"init seed: {bundle.init_seed}")
    else:
        arch = build_arch(args.alpha, args.rho, base_resolution=args.resolution)
        classes = args.num_classes
        report = count_costs(arch, num_classes=classes)
    print(f"input resolution: {arch.effective_resolution}")
    print(f"width multiplier: {arch.width_multiplier}")
    print("idx  kind             detail                      macs       params")
    for entry in report.entries:
        detail = ""
        if entry.index < len(arch.layers):
            detail = _layer_detail(arch.layers[entry.index])
        print(f"{entry.index:>3}  {entry.kind:<16} {detail:<20}"
              f"{entry.macs:>13}  {entry.params:>11}")
    print(f"total macs: {report.total_macs}")
    print(f"total params: {report.total_params}")
    return 0


def _cmd_bench(args) -> int:
    bundle = model_mod.load_bundle(_require_model_path(args))
    res = bundle.arch.effective_resolution
    rng = np.random.default_rng(args.seed)
    image = Tensor(
        rng.uniform(-1.0, 1.0, size=(1, res, res, 3)).astype(np.float32)
    )
    for _ in range(BENCH_WARMUP):
        model_mod.forward(bundle, image)
    samples = []
    for _ in range(args.iterations):
        t0 = time.perf_counter()
        model_mod.forward(bundle, image)
        samples.append((time.perf_counter() - t0) * 1000.0)
    arr = np.asarray(samples)
    print(f"iterations: {len(samples)} (after {BENCH_WARMUP} warmup)")
    print(f"p50_ms: {np.percentile(arr, 50):.3f}")
    print(f"p95_ms: {np.percentile(arr, 95):.3f}")
    print(f"mean_ms: {arr.mean():.3f}")
    return 0


def _cmd_serve(args) -> int:
    addr = _env_or(args.addr, "YCD_ADDR", DEFAULT_ADDR)
    host, port = _parse_addr(addr)
    model_path = _env_or(args.model, "YCD_MODEL")
    config = ServiceConfig(
        host=host,
        port=port,
        model_path=model_path,
        top_k=args.top_k,
        max_body_bytes=args.max_body_bytes,
        allowed_origins=tuple(args.origin or ()),
    )
    from . import serve as serve_mod

    serve_mod.run(config)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ycd",
        description="Currency note classification: datasets, training, "
                    "inspection, and serving.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-scan", help="list classes and image counts")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.set_defaults(func=_cmd_dataset_scan)

    p = sub.add_parser("dataset-split", help="write a train/test manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True, help="manifest JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing output file")
    p.set_defaults(func=_cmd_dataset_split)

    p = sub.add_parser("synth", help="generate the synthetic banknote dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=400)
    p.add_argument("--resolution", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a classification head")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="bundle output path")
    p.add_argument("--metrics-out", default=None,
                   help="metrics CSV path (default: bundle path with .metrics.csv)")
    p.add_argument("--alpha", type=float, default=1.0, help="width multiplier")
    p.add_argument("--rho", type=float, default=1.0, help="resolution multiplier")
    p.add_argument("--resolution", type=int, default=224,
                   help="base input resolution before rho")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a bundle on a dataset split")
    p.add_argument("--model", default=None, help="bundle path (or YCD_MODEL)")
    p.add_argument("--data", default=None, help="dataset root directory")
    p.add_argument("--manifest", default=None, help="existing manifest JSON")
    p.add_argument("--split", default=data_mod.TEST,
                   choices=[data_mod.TRAIN, data_mod.TEST])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("classify", help="classify one image file")
    p.add_argument("--model", default=None, help="bundle path (or YCD_MODEL)")
    p.add_argument("--image", required=True)
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("info", help="print layer table with MACs and params")
    p.add_argument("--model", default=None,
                   help="bundle path; omit to describe an architecture")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--resolution", type=int, default=224)
    p.add_argument("--num-classes", type=int, default=None)
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("bench", help="forward-pass latency statistics")
    p.add_argument("--model", default=None, help="bundle path (or YCD_MODEL)")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP classification service")
    p.add_argument("--addr", default=None,
                   help=f"host:port (or YCD_ADDR; default {DEFAULT_ADDR})")
    p.add_argument("--model", default=None, help="bundle path (or YCD_MODEL)")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--max-body-bytes", type=int, default=8 * 1024 * 1024)
    p.add_argument("--origin", action="append",
                   help="allowed CORS origin, repeatable")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _print_reproducibility(args)
    try:
        return args.func(args)
    except (CliError, data_mod.DataError, train_mod.TrainingError,
            BundleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
