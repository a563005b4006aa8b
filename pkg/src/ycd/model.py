"""Backbone weights, forward pass, and the versioned model-bundle file.

A `ModelBundle` is everything needed to classify: ordered class labels, the
architecture, the (frozen) backbone weights, and the trained dense head.

Bundle file layout, little-endian throughout:

    bytes 0..3    magic "YCDM"
    bytes 4..7    format version, uint32
    bytes 8..15   header length, uint64
    header        UTF-8 JSON: labels, arch, init_seed, per-tensor name/shape/offset
    blobs         raw float32 data, offsets relative to the end of the header

Round-trips are bitwise exact, including every weight.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import ops
from .arch import (
    ACTIVATION,
    DEPTHWISE_CONV,
    GLOBAL_AVG_POOL,
    POINTWISE_CONV,
    SCALE_BIAS,
    STANDARD_CONV,
    ArchSpec,
    validate_arch,
)
from .tensor import ShapeError, Tensor

MAGIC = b"YCDM"
FORMAT_VERSION = 1


class BundleError(Exception):
    """Base class for bundle file problems; `code` is machine-readable."""

    code = "bundle_error"


class BadMagicError(BundleError):
    code = "bad_magic"


class UnsupportedVersionError(BundleError):
    code = "unsupported_version"


class TruncatedFileError(BundleError):
    code = "truncated"


class HeaderError(BundleError):
    code = "bad_header"


class BundleShapeMismatchError(BundleError):
    code = "shape_mismatch"


@dataclass(frozen=True)
class ModelBundle:
    """Immutable, fully materialized model. Safe to share across threads."""

    format_version: int
    labels: tuple[str, ...]
    arch: ArchSpec
    backbone_weights: tuple[np.ndarray, ...]
    head_weight: np.ndarray  # (embedding_dim, num_labels) float32
    head_bias: np.ndarray  # (num_labels,) float32
    init_seed: int

    @property
    def num_classes(self) -> int:
        return len(self.labels)

    def cost_report(self):
        from .costs import count_costs

        return count_costs(self.arch, num_classes=self.num_classes)


def backbone_weight_layout(arch: ArchSpec) -> list[tuple[str, tuple[int, ...], int]]:
    """Ordered (name, shape, fan_in) for every backbone weight tensor.

    fan_in is 0 for tensors that are not randomly initialized (scale/bias).
    """
    layout = []
    for idx, layer in enumerate(arch.layers):
        k, m, n = layer.kernel_size, layer.in_channels, layer.out_channels
        prefix = f"layer{idx:03d}.{layer.kind}"
        if layer.kind == STANDARD_CONV:
            layout.append((f"{prefix}.kernel", (k, k, m, n), k * k * m))
        elif layer.kind == DEPTHWISE_CONV:
            layout.append((f"{prefix}.kernel", (k, k, m, 1), k * k))
        elif layer.kind == POINTWISE_CONV:
            layout.append((f"{prefix}.kernel", (1, 1, m, n), m))
        elif layer.kind == SCALE_BIAS:
            layout.append((f"{prefix}.scale", (n,), 0))
            layout.append((f"{prefix}.bias", (n,), 0))
    return layout


def init_backbone(arch: ArchSpec, seed: int) -> tuple[np.ndarray, ...]:
    """Deterministic pseudo-random backbone weights.

    Convolution kernels are drawn as N(0, 2/fan_in) float32; scale vectors
    start at one and bias vectors at zero. The same (arch, seed) always
    yields bitwise-identical weights.
    """
    validate_arch(arch)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    weights = []
    for name, shape, fan_in in backbone_weight_layout(arch):
        if name.endswith(".scale"):
            w = np.ones(shape, dtype=np.float32)
        elif name.endswith(".bias"):
            w = np.zeros(shape, dtype=np.float32)
        else:
            std = np.float32(np.sqrt(2.0 / fan_in))
            w = rng.standard_normal(shape, dtype=np.float32) * std
        w.flags.writeable = False
        weights.append(w)
    return tuple(weights)


def new_bundle(arch: ArchSpec, labels, seed: int) -> ModelBundle:
    """Fresh bundle: seeded backbone, zero-initialized head."""
    labels = tuple(str(l) for l in labels)
    if not labels:
        raise ValueError("at least one label is required")
    return ModelBundle(
        format_version=FORMAT_VERSION,
        labels=labels,
        arch=arch,
        backbone_weights=init_backbone(arch, seed),
        head_weight=np.zeros((arch.embedding_dim, len(labels)), dtype=np.float32),
        head_bias=np.zeros(len(labels), dtype=np.float32),
        init_seed=int(seed),
    )


def with_head(bundle: ModelBundle, weight: np.ndarray, bias: np.ndarray) -> ModelBundle:
    """Copy of the bundle with a trained head installed."""
    weight = np.ascontiguousarray(weight, dtype=np.float32)
    bias = np.ascontiguousarray(bias, dtype=np.float32)
    expected = (bundle.arch.embedding_dim, bundle.num_classes)
    if weight.shape != expected or bias.shape != (bundle.num_classes,):
        raise ShapeError(
            f"head shapes {weight.shape}/{bias.shape} do not match {expected}"
        )
    return ModelBundle(
        format_version=bundle.format_version,
        labels=bundle.labels,
        arch=bundle.arch,
        backbone_weights=bundle.backbone_weights,
        head_weight=weight,
        head_bias=bias,
        init_seed=bundle.init_seed,
    )


def embed(bundle: ModelBundle, image: Tensor) -> np.ndarray:
    """Backbone forward pass to the pooled embedding vector (float32)."""
    res = bundle.arch.effective_resolution
    if image.shape != (1, res, res, 3):
        raise ShapeError(f"image shape {image.shape} != (1, {res}, {res}, 3)")
    activation = ops.ACTIVATIONS[bundle.arch.activation]
    x = image
    cursor = 0
    weights = bundle.backbone_weights
    for layer in bundle.arch.layers:
        if layer.kind == STANDARD_CONV:
            params = ops.ConvParams(layer.kernel_size, layer.stride, "same",
                                    layer.in_channels, layer.out_channels)
            x = ops.conv2d_standard(x, Tensor(weights[cursor], _copy=False), params)
            cursor += 1
        elif layer.kind == DEPTHWISE_CONV:
            params = ops.ConvParams(layer.kernel_size, layer.stride, "same",
                                    layer.in_channels, layer.out_channels)
            x = ops.conv2d_depthwise(x, Tensor(weights[cursor], _copy=False), params)
            cursor += 1
        elif layer.kind == POINTWISE_CONV:
            x = ops.conv2d_pointwise(x, Tensor(weights[cursor], _copy=False))
            cursor += 1
        elif layer.kind == SCALE_BIAS:
            x = ops.scale_bias(x, weights[cursor], weights[cursor + 1])
            cursor += 2
        elif layer.kind == ACTIVATION:
            x = activation(x)
        elif layer.kind == GLOBAL_AVG_POOL:
            x = ops.global_avg_pool(x)
    return x.data.ravel()


def forward(bundle: ModelBundle, image: Tensor) -> tuple[np.ndarray, np.ndarray]:
    """Full forward pass: (embedding float32 vector, class probabilities float64).

    Head arithmetic runs in float64; probabilities sum to 1.
    """
    embedding = embed(bundle, image)
    logits = ops.dense_forward(
        embedding.astype(np.float64),
        bundle.head_weight.astype(np.float64),
        bundle.head_bias.astype(np.float64),
    )
    return embedding, ops.softmax(logits)


def bundles_equal(a: ModelBundle, b: ModelBundle) -> bool:
    """Bitwise equality of every field, weights included."""
    if (a.format_version, a.labels, a.arch, a.init_seed) != (
        b.format_version, b.labels, b.arch, b.init_seed
    ):
        return False
    if len(a.backbone_weights) != len(b.backbone_weights):
        return False
    pairs = list(zip(a.backbone_weights, b.backbone_weights))
    pairs += [(a.head_weight, b.head_weight), (a.head_bias, b.head_bias)]
    return all(x.shape == y.shape and x.tobytes() == y.tobytes() for x, y in pairs)


def _tensor_entries(bundle: ModelBundle) -> list[tuple[str, np.ndarray]]:
    layout = backbone_weight_layout(bundle.arch)
    entries = [(name, w) for (name, _, _), w in zip(layout, bundle.backbone_weights)]
    entries.append(("head.weight", bundle.head_weight))
    entries.append(("head.bias", bundle.head_bias))
    return entries


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write the bundle to `path` in the versioned binary format."""
    tensors = _tensor_entries(bundle)
    offset = 0
    tensor_meta = []
    for name, arr in tensors:
        tensor_meta.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 4
    header = {
        "labels": list(bundle.labels),
        "arch": bundle.arch.to_dict(),
        "init_seed": bundle.init_seed,
        "tensors": tensor_meta,
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", bundle.format_version))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_bundle(path) -> ModelBundle:
    """Read and validate a bundle file; raises a `BundleError` subclass on damage."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise TruncatedFileError(f"file is {len(raw)} bytes, shorter than the magic")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 16:
        raise TruncatedFileError("file ends inside the fixed header")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version}, supported: {FORMAT_VERSION}")
    header_len = struct.unpack("<Q", raw[8:16])[0]
    blob_start = 16 + header_len
    if len(raw) < blob_start:
        raise TruncatedFileError("file ends inside the JSON header")
    try:
        header = json.loads(raw[16:blob_start].decode("utf-8"))
        labels = tuple(str(l) for l in header["labels"])
        arch = ArchSpec.from_dict(header["arch"])
        init_seed = int(header["init_seed"])
        tensor_meta = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise HeaderError(f"unparseable header: {exc}") from exc
    try:
        validate_arch(arch)
    except ShapeError as exc:
        raise HeaderError(f"invalid architecture: {exc}") from exc

    blob = raw[blob_start:]
    arrays: dict[str, np.ndarray] = {}
    for meta in tensor_meta:
        shape = tuple(int(d) for d in meta["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = int(meta["offset"])
        end = start + count * 4
        if start < 0 or end > len(blob):
            raise TruncatedFileError(
                f"tensor {meta['name']!r} spans bytes {start}..{end} of a {len(blob)}-byte blob"
            )
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(shape)
        arr = arr.astype(np.float32, copy=True)
        arr.flags.writeable = False
        arrays[str(meta["name"])] = arr

    expected = backbone_weight_layout(arch)
    backbone = []
    for name, shape, _ in expected:
        if name not in arrays:
            raise BundleShapeMismatchError(f"missing backbone tensor {name!r}")
        if arrays[name].shape != shape:
            raise BundleShapeMismatchError(
                f"tensor {name!r} has shape {arrays[name].shape}, architecture requires {shape}"
            )
        backbone.append(arrays[name])
    for name in ("head.weight", "head.bias"):
        if name not in arrays:
            raise BundleShapeMismatchError(f"missing head tensor {name!r}")
    head_w, head_b = arrays["head.weight"], arrays["head.bias"]
    head_shape = (arch.embedding_dim, len(labels))
    if head_w.shape != head_shape or head_b.shape != (len(labels),):
        raise BundleShapeMismatchError(
            f"head shapes {head_w.shape}/{head_b.shape} do not match "
            f"{head_shape} for {len(labels)} labels"
        )
    return ModelBundle(
        format_version=version,
        labels=labels,
        arch=arch,
        backbone_weights=tuple(backbone),
        head_weight=head_w,
        head_bias=head_b,
        init_seed=init_seed,
    )
