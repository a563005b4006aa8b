"""Dataset inventory, deterministic splitting, image preprocessing, and the
synthetic banknote-style dataset generator.

Dataset layout on disk is one directory per class label under a common root,
holding .jpg/.jpeg/.png files. A manifest records every file, its label, and
its train/test assignment; the assignment is a pure function of the sorted
file list, the seed, and the split policy.
"""
from __future__ import annotations

import colorsys
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensor import Tensor

TRAIN = "train"
TEST = "test"

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


class DataError(ValueError):
    """Dataset layout, decoding, or split-policy problem."""


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    split: str | None = None


@dataclass(frozen=True)
class SplitPolicy:
    """How many files per class go to the test split.

    mode "count": exactly `value` test files per class.
    mode "fraction": round(value * n) test files per class.
    mode "auto": 55 test files when a class has exactly 400 images
    (the reference per-class table), otherwise the 0.15 fraction.
    """

    mode: str = "auto"
    value: float | None = None

    AUTO_CLASS_SIZE = 400
    AUTO_TEST_COUNT = 55
    AUTO_FRACTION = 0.15

    def __post_init__(self):
        if self.mode not in ("auto", "fraction", "count"):
            raise DataError(f"unknown split mode {self.mode!r}")
        if self.mode == "fraction" and not (self.value and 0 < self.value < 1):
            raise DataError(f"fraction must be in (0, 1), got {self.value}")
        if self.mode == "count" and (self.value is None or int(self.value) < 1):
            raise DataError(f"count must be >= 1, got {self.value}")

    def test_count(self, n: int) -> int:
        if self.mode == "count":
            t = int(self.value)
        elif self.mode == "fraction":
            t = int(math.floor(self.value * n + 0.5))
        elif n == self.AUTO_CLASS_SIZE:
            t = self.AUTO_TEST_COUNT
        else:
            t = int(math.floor(self.AUTO_FRACTION * n + 0.5))
        if self.mode == "count" and t >= n:
            raise DataError(f"per-class test count {t} >= class size {n}")
        return t

    def to_dict(self) -> dict:
        return {"mode": self.mode, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPolicy":
        return cls(mode=d["mode"], value=d.get("value"))


@dataclass(frozen=True)
class DatasetManifest:
    classes: tuple[str, ...]
    entries: tuple[ManifestEntry, ...]
    seed: int | None = None
    policy: SplitPolicy | None = None

    def select(self, split: str | None) -> list[ManifestEntry]:
        if split is None:
            return list(self.entries)
        return [e for e in self.entries if e.split == split]

    def counts(self) -> dict[str, dict[str, int]]:
        out = {label: {TRAIN: 0, TEST: 0, "total": 0} for label in self.classes}
        for e in self.entries:
            out[e.label]["total"] += 1
            if e.split in (TRAIN, TEST):
                out[e.label][e.split] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "seed": self.seed,
            "policy": self.policy.to_dict() if self.policy else None,
            "entries": [
                {"path": e.path, "label": e.label, "split": e.split} for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            classes=tuple(d["classes"]),
            entries=tuple(
                ManifestEntry(path=e["path"], label=e["label"], split=e.get("split"))
                for e in d["entries"]
            ),
            seed=d.get("seed"),
            policy=SplitPolicy.from_dict(d["policy"]) if d.get("policy") else None,
        )


def save_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=1), encoding="utf-8")


def load_manifest(path) -> DatasetManifest:
    return DatasetManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def scan_dataset(root) -> DatasetManifest:
    """Inventory root/<label>/*.{jpg,jpeg,png}; labels and paths sorted."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    class_dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name)
    if not class_dirs:
        raise DataError(f"no classes found under {root}")
    entries: list[ManifestEntry] = []
    for d in class_dirs:
        files = sorted(
            p for p in d.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise DataError(f"class directory {d} contains no images")
        entries.extend(ManifestEntry(path=str(p), label=d.name) for p in files)
    return DatasetManifest(classes=tuple(d.name for d in class_dirs), entries=tuple(entries))


def split_manifest(
    manifest: DatasetManifest, policy: SplitPolicy, seed: int
) -> DatasetManifest:
    """Assign each entry to train or test, deterministically per (entries, seed, policy).

    Per class, entries are ordered by path, shuffled with a class-specific
    seeded generator, and the last `test_count` of the shuffle become the
    test split.
    """
    assigned: dict[str, str] = {}
    for class_idx, label in enumerate(manifest.classes):
        paths = sorted(e.path for e in manifest.entries if e.label == label)
        n = len(paths)
        t = policy.test_count(n)
        if t >= n:
            raise DataError(f"class {label!r}: test count {t} >= class size {n}")
        rng = np.random.default_rng(np.random.SeedSequence([seed, class_idx]))
        order = rng.permutation(n)
        test_positions = {paths[i] for i in order[n - t :]}
        for p in paths:
            assigned[p] = TEST if p in test_positions else TRAIN
    entries = tuple(
        ManifestEntry(path=e.path, label=e.label, split=assigned[e.path])
        for e in manifest.entries
    )
    return DatasetManifest(
        classes=manifest.classes, entries=entries, seed=int(seed), policy=policy
    )


@dataclass(frozen=True)
class ImageRecord:
    """Decoded image: (1, H, W, 3) tensor with values in [0, 1]."""

    pixels: Tensor
    source: str


def decode_image(path) -> ImageRecord:
    """Decode a JPEG/PNG file to an RGB [0, 1] tensor."""
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / np.float32(255.0)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    if arr.size == 0:
        raise DataError(f"image {path} has a zero-sized dimension")
    return ImageRecord(pixels=Tensor(arr[np.newaxis, ...]), source=str(path))


def decode_image_bytes(data: bytes, source: str = "<bytes>") -> ImageRecord:
    """Same as decode_image but from an in-memory byte string."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / np.float32(255.0)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {source}: {exc}") from exc
    if arr.size == 0:
        raise DataError(f"image {source} has a zero-sized dimension")
    return ImageRecord(pixels=Tensor(arr[np.newaxis, ...]), source=source)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W, C) array, sampling at pixel centers.

    Edge-clamped; resizing to the input size reproduces it exactly.
    """
    h, w = img.shape[:2]
    if h < 1 or w < 1 or out_h < 1 or out_w < 1:
        raise DataError(f"cannot resize {h}x{w} to {out_h}x{out_w}")
    ys = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    img64 = img.astype(np.float64)
    top = img64[y0][:, x0] * (1 - wx) + img64[y0][:, x1] * wx
    bottom = img64[y1][:, x0] * (1 - wx) + img64[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    return np.ascontiguousarray(out, dtype=np.float32)


def preprocess_record(record: ImageRecord, target_resolution: int) -> Tensor:
    """Resize to target x target and map [0, 1] pixel values to [-1, 1]."""
    img = record.pixels.data[0]
    resized = resize_bilinear(img, target_resolution, target_resolution)
    return Tensor((resized * np.float32(2.0) - np.float32(1.0))[np.newaxis, ...], _copy=False)


def load_and_preprocess(path, target_resolution: int) -> Tensor:
    """Decode, bilinear-resize, and normalize a file to the model input scale."""
    return preprocess_record(decode_image(path), target_resolution)


# ---------------------------------------------------------------------------
# Synthetic dataset
# ---------------------------------------------------------------------------

# Denomination-flavored label names for up to eight synthetic classes.
SYNTHETIC_LABELS = ("100", "250", "500", "1000", "2000", "5000", "10000", "20000")

MAX_SYNTHETIC_CLASSES = 8


def _synthetic_image(
    rng: np.random.Generator, class_idx: int, k_classes: int, resolution: int
) -> np.ndarray:
    """One synthetic note: dominant class color plus a tally-bar glyph.

    Classes are separated on two independent axes so their mean colors stay
    linearly separable after heavy downstream mixing: hue (evenly spaced on
    the wheel) and a per-class brightness tier. Jitter and noise are kept
    well inside the tier gaps.
    """
    hue = class_idx / k_classes
    sat = 0.80 + 0.06 * rng.random()
    if k_classes > 1:
        val_base = 0.55 + 0.35 * class_idx / (k_classes - 1)
    else:
        val_base = 0.75
    val = val_base + 0.06 * (rng.random() - 0.5)
    bg = colorsys.hsv_to_rgb(hue, sat, val)
    img = np.empty((resolution, resolution, 3), dtype=np.float64)
    img[...] = bg
    # glyph: class_idx + 1 dark vertical bars, jittered horizontally
    bar_color = colorsys.hsv_to_rgb(hue, sat, val * 0.4)
    bars = class_idx + 1
    slot = resolution / (2 * bars + 1)
    bar_w = max(1, int(slot * 0.8))
    y0, y1 = int(resolution * 0.30), int(resolution * 0.70)
    for b in range(bars):
        x = int((2 * b + 1) * slot) + int(rng.integers(-2, 3))
        x = min(max(x, 0), resolution - bar_w)
        img[y0:y1, x : x + bar_w] = bar_color
    img += rng.normal(0.0, 0.01, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_dataset(
    root, k_classes: int = 4, n_per_class: int = 400, resolution: int = 96, seed: int = 0
) -> DatasetManifest:
    """Write k directories of n PNGs each; classes separable by dominant color.

    Class hues are evenly spaced on the color wheel (360/k degrees apart) and
    every pixel value is a pure function of (seed, class, image index), so the
    generated files are bitwise reproducible.
    """
    if not 1 <= k_classes <= MAX_SYNTHETIC_CLASSES:
        raise DataError(f"k_classes must be in 1..{MAX_SYNTHETIC_CLASSES}, got {k_classes}")
    if n_per_class < 1:
        raise DataError(f"n_per_class must be >= 1, got {n_per_class}")
    root = Path(root)
    labels = SYNTHETIC_LABELS[:k_classes]
    for class_idx, label in enumerate(labels):
        class_dir = root / label
        class_dir.mkdir(parents=True, exist_ok=True)
        for img_idx in range(n_per_class):
            rng = np.random.default_rng(np.random.SeedSequence([seed, class_idx, img_idx]))
            img = _synthetic_image(rng, class_idx, k_classes, resolution)
            pixels = np.round(img * 255.0).astype(np.uint8)
            Image.fromarray(pixels).save(class_dir / f"img_{img_idx:04d}.png", format="PNG")
    return scan_dataset(root)
