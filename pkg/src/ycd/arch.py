"""Symbolic network description and the lightweight separable-convolution body.

An `ArchSpec` is a validated chain of `LayerSpec`s plus the two global
shrink knobs: a width multiplier thinning every channel count and a
resolution multiplier shrinking the input. `build_arch` emits the canonical
body: a stride-2 entry convolution followed by thirteen depthwise+pointwise
blocks (stride-2 depthwise at blocks 2, 4, 6 and 12, channel count doubling
at each stride-2 transition, 32 through 1024), ending in global average
pooling.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .tensor import ShapeError

# Layer kinds
STANDARD_CONV = "standard_conv"
DEPTHWISE_CONV = "depthwise_conv"
POINTWISE_CONV = "pointwise_conv"
SCALE_BIAS = "scale_bias"
ACTIVATION = "activation"
GLOBAL_AVG_POOL = "global_avg_pool"
DENSE = "dense"

LAYER_KINDS = (
    STANDARD_CONV,
    DEPTHWISE_CONV,
    POINTWISE_CONV,
    SCALE_BIAS,
    ACTIVATION,
    GLOBAL_AVG_POOL,
    DENSE,
)

IMAGE_CHANNELS = 3


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the network.

    `kernel_size`/`stride` only apply to convolutions; `in_channels` and
    `out_channels` must chain consistently from layer to layer (for
    channel-preserving kinds they are equal).
    """

    kind: str
    kernel_size: int = 0
    stride: int = 1
    in_channels: int = 0
    out_channels: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(
            kind=d["kind"],
            kernel_size=int(d.get("kernel_size", 0)),
            stride=int(d.get("stride", 1)),
            in_channels=int(d.get("in_channels", 0)),
            out_channels=int(d.get("out_channels", 0)),
        )


@dataclass(frozen=True)
class ArchSpec:
    """Full symbolic description of the network body."""

    input_resolution: int
    width_multiplier: float
    resolution_multiplier: float
    layers: tuple[LayerSpec, ...]
    embedding_dim: int
    activation: str = "relu6"

    @property
    def effective_resolution(self) -> int:
        return scaled_resolution(self.input_resolution, self.resolution_multiplier)

    def to_dict(self) -> dict:
        return {
            "input_resolution": self.input_resolution,
            "width_multiplier": self.width_multiplier,
            "resolution_multiplier": self.resolution_multiplier,
            "embedding_dim": self.embedding_dim,
            "activation": self.activation,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(
            input_resolution=int(d["input_resolution"]),
            width_multiplier=float(d["width_multiplier"]),
            resolution_multiplier=float(d["resolution_multiplier"]),
            layers=tuple(LayerSpec.from_dict(ld) for ld in d["layers"]),
            embedding_dim=int(d["embedding_dim"]),
            activation=d.get("activation", "relu6"),
        )


def scaled_channels(base: int, alpha: float) -> int:
    """Channel count after the width multiplier; never shrinks below 1."""
    return max(1, round(alpha * base))


def scaled_resolution(base: int, rho: float) -> int:
    res = round(rho * base)
    if res < 1:
        raise ShapeError(f"effective resolution {res} < 1 (base {base}, multiplier {rho})")
    return res


def validate_arch(arch: ArchSpec) -> None:
    """Check the layer chain: known kinds, consistent channels, pooled tail."""
    if not 0 < arch.width_multiplier <= 1:
        raise ShapeError(f"width multiplier {arch.width_multiplier} outside (0, 1]")
    if not 0 < arch.resolution_multiplier <= 1:
        raise ShapeError(f"resolution multiplier {arch.resolution_multiplier} outside (0, 1]")
    scaled_resolution(arch.input_resolution, arch.resolution_multiplier)
    channels = IMAGE_CHANNELS
    pooled = False
    for idx, layer in enumerate(arch.layers):
        if layer.kind not in LAYER_KINDS:
            raise ShapeError(f"layer {idx}: unknown kind {layer.kind!r}")
        if pooled and layer.kind != DENSE:
            raise ShapeError(f"layer {idx}: {layer.kind} after global_avg_pool")
        if layer.kind in (STANDARD_CONV, DEPTHWISE_CONV):
            if layer.kernel_size < 1 or layer.stride < 1:
                raise ShapeError(f"layer {idx}: bad conv geometry {layer}")
        if layer.kind == GLOBAL_AVG_POOL:
            pooled = True
            if arch.embedding_dim != channels:
                raise ShapeError(
                    f"embedding_dim {arch.embedding_dim} != {channels} pooled channels"
                )
            continue
        if layer.in_channels != channels:
            raise ShapeError(
                f"layer {idx} ({layer.kind}): expects {layer.in_channels} channels, "
                f"chain carries {channels}"
            )
        if layer.kind == DEPTHWISE_CONV:
            if layer.out_channels != layer.in_channels:
                raise ShapeError(f"layer {idx}: depthwise must preserve channel count")
        elif layer.kind in (SCALE_BIAS, ACTIVATION):
            if layer.out_channels != layer.in_channels:
                raise ShapeError(f"layer {idx}: {layer.kind} must preserve channel count")
        channels = layer.out_channels
    if not pooled:
        raise ShapeError("layer chain must contain a global_avg_pool")
    body = [l for l in arch.layers if l.kind != DENSE]
    if body and body[-1].kind != GLOBAL_AVG_POOL:
        raise ShapeError("body must end in global_avg_pool")


def _conv_block(kind: str, k: int, stride: int, cin: int, cout: int) -> list[LayerSpec]:
    return [
        LayerSpec(kind=kind, kernel_size=k, stride=stride, in_channels=cin, out_channels=cout),
        LayerSpec(kind=SCALE_BIAS, in_channels=cout, out_channels=cout),
        LayerSpec(kind=ACTIVATION, in_channels=cout, out_channels=cout),
    ]


# (depthwise stride, pointwise output channels before width scaling) for the
# thirteen separable blocks following the entry convolution.
_BLOCK_TABLE = (
    (1, 64),
    (2, 128),
    (1, 128),
    (2, 256),
    (1, 256),
    (2, 512),
    (1, 512),
    (1, 512),
    (1, 512),
    (1, 512),
    (1, 512),
    (2, 1024),
    (1, 1024),
)

_ENTRY_CHANNELS = 32


def build_arch(alpha: float, rho: float, base_resolution: int = 224) -> ArchSpec:
    """Canonical 27-convolution body, thinned by `alpha` and shrunk by `rho`.

    Layer pattern: standard 3x3 stride-2 entry, then for each table row a
    depthwise 3x3 (stride per row) and a pointwise 1x1 to the row's channel
    count, every convolution followed by per-channel scale/bias and the
    activation; global average pooling closes the chain.
    """
    if not 0 < alpha <= 1:
        raise ShapeError(f"width multiplier {alpha} outside (0, 1]")
    if not 0 < rho <= 1:
        raise ShapeError(f"resolution multiplier {rho} outside (0, 1]")
    layers: list[LayerSpec] = []
    c = scaled_channels(_ENTRY_CHANNELS, alpha)
    layers += _conv_block(STANDARD_CONV, 3, 2, IMAGE_CHANNELS, c)
    for stride, base_out in _BLOCK_TABLE:
        layers += _conv_block(DEPTHWISE_CONV, 3, stride, c, c)
        cout = scaled_channels(base_out, alpha)
        layers += _conv_block(POINTWISE_CONV, 1, 1, c, cout)
        c = cout
    layers.append(LayerSpec(kind=GLOBAL_AVG_POOL, in_channels=c, out_channels=c))
    arch = ArchSpec(
        input_resolution=base_resolution,
        width_multiplier=alpha,
        resolution_multiplier=rho,
        layers=tuple(layers),
        embedding_dim=c,
    )
    validate_arch(arch)
    return arch


def with_activation(arch: ArchSpec, name: str) -> ArchSpec:
    """Same architecture with a different activation ('relu6' or 'relu')."""
    if name not in ("relu6", "relu"):
        raise ValueError(f"unknown activation {name!r}")
    return replace(arch, activation=name)
