"""Convolution kernels, activations, pooling, and the classification-head math.

Three convolution variants are provided: standard (filter-and-combine in one
step), depthwise (one spatial filter per input channel), and pointwise (1x1
channel mixing). Depthwise followed by pointwise factorizes a standard
convolution at a fraction of its cost; the accounting for that lives in
`ycd.costs`.

Padding semantics, fixed here because they determine output shapes everywhere:

* "same": output side = ceil(in / stride); zero padding split symmetrically,
  with the extra element (odd totals) on the bottom/right.
* "valid": output side = floor((in - kernel) / stride) + 1; no padding.

All operations are pure functions and allocate fresh outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import EmptyReductionError, ShapeError, Tensor, reduce_mean_spatial

VALID_PADDINGS = ("same", "valid")


@dataclass(frozen=True)
class ConvParams:
    """Geometry of one convolution layer.

    For depthwise use, `out_channels` is ignored: the output channel count
    always equals `in_channels`.
    """

    kernel_size: int
    stride: int
    padding: str
    in_channels: int
    out_channels: int

    def __post_init__(self):
        if self.kernel_size < 1:
            raise ShapeError(f"kernel_size must be >= 1, got {self.kernel_size}")
        if self.stride < 1:
            raise ShapeError(f"stride must be >= 1, got {self.stride}")
        if self.padding not in VALID_PADDINGS:
            raise ShapeError(f"padding must be one of {VALID_PADDINGS}, got {self.padding!r}")
        if self.in_channels < 1:
            raise ShapeError(f"in_channels must be >= 1, got {self.in_channels}")


def conv_output_size(in_size: int, kernel_size: int, stride: int, padding: str) -> int:
    """Spatial output extent for one axis under the padding rules above."""
    if padding == "same":
        return -(-in_size // stride)
    return (in_size - kernel_size) // stride + 1


def _pad_amounts(in_size: int, out_size: int, kernel_size: int, stride: int) -> tuple[int, int]:
    total = max((out_size - 1) * stride + kernel_size - in_size, 0)
    lead = total // 2
    return lead, total - lead


def _conv_geometry(h: int, w: int, params: ConvParams) -> tuple[int, int, tuple, tuple]:
    ho = conv_output_size(h, params.kernel_size, params.stride, params.padding)
    wo = conv_output_size(w, params.kernel_size, params.stride, params.padding)
    if ho < 1 or wo < 1:
        raise ShapeError(
            f"zero-sized spatial output for input {h}x{w}, kernel {params.kernel_size}, "
            f"stride {params.stride}, padding {params.padding!r}"
        )
    if params.padding == "same":
        pad_h = _pad_amounts(h, ho, params.kernel_size, params.stride)
        pad_w = _pad_amounts(w, wo, params.kernel_size, params.stride)
    else:
        pad_h = pad_w = (0, 0)
    return ho, wo, pad_h, pad_w


def _padded(x: np.ndarray, pad_h: tuple, pad_w: tuple) -> np.ndarray:
    if pad_h == (0, 0) and pad_w == (0, 0):
        return x
    return np.pad(x, ((0, 0), pad_h, pad_w, (0, 0)))


def conv2d_standard(inp: Tensor, weights: Tensor, params: ConvParams) -> Tensor:
    """Standard convolution: filters and combines all input channels per output.

    `weights` has shape (kernel, kernel, in_channels, out_channels).
    out[b,y,x,n] = sum_{i,j,m} in[b, y*s+i-off, x*s+j-off, m] * w[i,j,m,n],
    with out-of-bounds taps reading zero.
    """
    n, h, w, m = inp.shape
    k = params.kernel_size
    if m != params.in_channels:
        raise ShapeError(f"input has {m} channels, params expect {params.in_channels}")
    if weights.shape != (k, k, m, params.out_channels):
        raise ShapeError(
            f"weights shape {weights.shape} inconsistent with params "
            f"({k},{k},{m},{params.out_channels})"
        )
    ho, wo, pad_h, pad_w = _conv_geometry(h, w, params)
    # accumulate in float64, round once at the end
    xp = _padded(inp.data, pad_h, pad_w).astype(np.float64)
    w64 = weights.data.astype(np.float64)
    s = params.stride
    out = np.zeros((n, ho, wo, params.out_channels), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            patch = xp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s, :]
            out += patch @ w64[i, j]
    return Tensor(np.ascontiguousarray(out, dtype=np.float32), _copy=False)


def conv2d_depthwise(inp: Tensor, weights: Tensor, params: ConvParams) -> Tensor:
    """Depthwise convolution: one spatial filter per input channel.

    `weights` has shape (kernel, kernel, in_channels, 1); output channel m is
    channel m of the input convolved with filter m alone.
    """
    n, h, w, m = inp.shape
    k = params.kernel_size
    if m != params.in_channels:
        raise ShapeError(f"input has {m} channels, params expect {params.in_channels}")
    if weights.shape != (k, k, m, 1):
        raise ShapeError(f"depthwise weights shape {weights.shape} != ({k},{k},{m},1)")
    ho, wo, pad_h, pad_w = _conv_geometry(h, w, params)
    xp = _padded(inp.data, pad_h, pad_w).astype(np.float64)
    w64 = weights.data.astype(np.float64)
    s = params.stride
    out = np.zeros((n, ho, wo, m), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            patch = xp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s, :]
            out += patch * w64[i, j, :, 0]
    return Tensor(np.ascontiguousarray(out, dtype=np.float32), _copy=False)


def conv2d_pointwise(inp: Tensor, weights: Tensor) -> Tensor:
    """Pointwise (1x1) convolution: per-pixel linear mix of channels."""
    n, h, w, m = inp.shape
    if weights.data.ndim != 4 or weights.shape[:3] != (1, 1, m):
        raise ShapeError(f"pointwise weights shape {weights.shape} != (1,1,{m},N)")
    out = inp.data.astype(np.float64) @ weights.data[0, 0].astype(np.float64)
    return Tensor(np.ascontiguousarray(out, dtype=np.float32), _copy=False)


def relu6(inp: Tensor) -> Tensor:
    """Clamp to [0, 6] elementwise."""
    return Tensor(np.minimum(np.maximum(inp.data, np.float32(0)), np.float32(6)), _copy=False)


def relu(inp: Tensor) -> Tensor:
    """Clamp below at 0 elementwise."""
    return Tensor(np.maximum(inp.data, np.float32(0)), _copy=False)


ACTIVATIONS = {"relu6": relu6, "relu": relu}


def scale_bias(inp: Tensor, scale: np.ndarray, bias: np.ndarray) -> Tensor:
    """Per-channel affine map, out[...,c] = in[...,c] * scale[c] + bias[c].

    This is the folded inference form of batch normalization.
    """
    c = inp.shape[3]
    scale = np.asarray(scale, dtype=np.float32)
    bias = np.asarray(bias, dtype=np.float32)
    if scale.shape != (c,) or bias.shape != (c,):
        raise ShapeError(
            f"scale/bias lengths {scale.shape}/{bias.shape} do not match {c} channels"
        )
    return Tensor(inp.data * scale + bias, _copy=False)


def global_avg_pool(inp: Tensor) -> Tensor:
    """Spatial mean per channel; collapses HxW to 1x1."""
    return reduce_mean_spatial(inp)


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over a vector of logits (float64 result)."""
    v = np.asarray(logits, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"softmax expects a non-empty vector, got shape {v.shape}")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


LOSS_EPSILON = 1e-12


def cross_entropy(probs, target_class: int) -> float:
    """Negative log-likelihood of the target class, floored at LOSS_EPSILON."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= target_class < p.size:
        raise IndexError(f"target class {target_class} out of range for {p.size} classes")
    return float(-math.log(p[target_class] + LOSS_EPSILON))


def cross_entropy_grad(probs, target_class: int) -> np.ndarray:
    """Gradient of cross_entropy(softmax(logits), target) with respect to the logits."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= target_class < p.size:
        raise IndexError(f"target class {target_class} out of range for {p.size} classes")
    g = p.copy()
    g[target_class] -= 1.0
    return g


def softmax_batch(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax for a (batch, classes) float64 matrix."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map out = W^T x + b for x of length M, W of shape (M, K), b of length K."""
    x = np.asarray(x)
    weights = np.asarray(weights)
    bias = np.asarray(bias)
    m, k = weights.shape
    if x.shape != (m,):
        raise ShapeError(f"input length {x.shape} does not match weight rows {m}")
    if bias.shape != (k,):
        raise ShapeError(f"bias length {bias.shape} does not match weight cols {k}")
    return weights.T @ x + bias


def dense_backward(
    x: np.ndarray, weights: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of the dense layer given dLoss/dOut.

    Returns (dW, db, dx) with the same shapes as (weights, bias, x).
    """
    x = np.asarray(x)
    weights = np.asarray(weights)
    grad_out = np.asarray(grad_out)
    m, k = weights.shape
    if x.shape != (m,) or grad_out.shape != (k,):
        raise ShapeError(
            f"gradient shapes disagree: x {x.shape}, grad_out {grad_out.shape}, W ({m},{k})"
        )
    d_weights = np.outer(x, grad_out)
    d_bias = grad_out.copy()
    d_x = weights @ grad_out
    return d_weights, d_bias, d_x
