"""MAC and parameter accounting over an architecture.

Conventions (exact integer arithmetic throughout):

* one MAC = one fused multiply-accumulate; bias additions, per-channel
  scale/bias, pooling and activations contribute zero MACs;
* standard conv  : MACs = K^2 * M * N * F_out^2, params = K^2 * M * N + N
* depthwise conv : MACs = K^2 * M * F_out^2,     params = K^2 * M + M
* pointwise conv : MACs = M * N * F^2,           params = M * N + N
* dense          : MACs = M * K,                 params = M * K + K
* scale/bias     : MACs = 0,                     params = 2 * C

where F/F_out are the square feature-map sides before/after the layer.
The separable factorization (depthwise + pointwise at equal geometry)
therefore costs exactly 1/N + 1/K^2 of the standard convolution.
"""
from __future__ import annotations

from dataclasses import dataclass

from .arch import (
    ACTIVATION,
    DENSE,
    DEPTHWISE_CONV,
    GLOBAL_AVG_POOL,
    POINTWISE_CONV,
    SCALE_BIAS,
    STANDARD_CONV,
    ArchSpec,
    LayerSpec,
    validate_arch,
)
from .ops import conv_output_size
from .tensor import ShapeError


@dataclass(frozen=True)
class LayerCost:
    index: int
    kind: str
    macs: int
    params: int


@dataclass(frozen=True)
class CostReport:
    entries: tuple[LayerCost, ...]

    @property
    def total_macs(self) -> int:
        return sum(e.macs for e in self.entries)

    @property
    def total_params(self) -> int:
        return sum(e.params for e in self.entries)


def layer_cost(layer: LayerSpec, feature_side: int) -> tuple[int, int, int]:
    """(macs, params, output feature side) of one layer at the given input side."""
    k, s = layer.kernel_size, layer.stride
    m, n = layer.in_channels, layer.out_channels
    if layer.kind == STANDARD_CONV:
        out = conv_output_size(feature_side, k, s, "same")
        return k * k * m * n * out * out, k * k * m * n + n, out
    if layer.kind == DEPTHWISE_CONV:
        out = conv_output_size(feature_side, k, s, "same")
        return k * k * m * out * out, k * k * m + m, out
    if layer.kind == POINTWISE_CONV:
        return m * n * feature_side * feature_side, m * n + n, feature_side
    if layer.kind == SCALE_BIAS:
        return 0, 2 * m, feature_side
    if layer.kind == ACTIVATION:
        return 0, 0, feature_side
    if layer.kind == GLOBAL_AVG_POOL:
        return 0, 0, 1
    if layer.kind == DENSE:
        return m * n, m * n + n, feature_side
    raise ShapeError(f"unknown layer kind {layer.kind!r}")


def count_costs(
    arch: ArchSpec,
    input_resolution: int | None = None,
    num_classes: int | None = None,
) -> CostReport:
    """Per-layer and total MAC/parameter counts for a forward pass.

    `input_resolution` overrides the architecture's effective resolution.
    When `num_classes` is given, a dense head from the embedding to that many
    classes is appended to the accounting.
    """
    if arch.layers:  # the zero-layer arch is a legal degenerate input here
        validate_arch(arch)
    side = arch.effective_resolution if input_resolution is None else int(input_resolution)
    if side < 1:
        raise ShapeError(f"input resolution {side} < 1")
    entries = []
    for idx, layer in enumerate(arch.layers):
        macs, params, side = layer_cost(layer, side)
        entries.append(LayerCost(index=idx, kind=layer.kind, macs=macs, params=params))
    if num_classes is not None:
        head = LayerSpec(kind=DENSE, in_channels=arch.embedding_dim, out_channels=num_classes)
        macs, params, side = layer_cost(head, side)
        entries.append(LayerCost(index=len(arch.layers), kind=DENSE, macs=macs, params=params))
    return CostReport(entries=tuple(entries))
