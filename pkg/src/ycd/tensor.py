"""Dense 4-D tensor type used throughout the engine.

Layout is fixed: (batch, height, width, channels), row-major, float32
storage. Reductions may accumulate in float64 internally. Tensors are
immutable once constructed and therefore safe to share across threads.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Shape = tuple[int, int, int, int]

# Element-count ceiling; anything larger than this cannot be addressed
# as a flat float32 buffer on supported platforms.
_MAX_ELEMENTS = np.iinfo(np.intp).max // 4


class ShapeError(ValueError):
    """Inconsistent or unrepresentable tensor shape."""


class EmptyReductionError(ValueError):
    """Reduction requested over zero elements."""


class Tensor:
    """Immutable 4-D float32 array in (batch, height, width, channels) order."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray, _copy: bool = True):
        arr = np.array(data, dtype=np.float32, copy=_copy, order="C")
        if arr.ndim != 4:
            raise ShapeError(f"tensor must be 4-D, got {arr.ndim}-D shape {arr.shape}")
        _check_element_count(arr.shape)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Tensor is immutable")

    @property
    def shape(self) -> Shape:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def tolist(self) -> list:
        return self.data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def _check_element_count(shape: Sequence[int]) -> int:
    count = 1
    for dim in shape:
        if dim < 0:
            raise ShapeError(f"negative dimension in shape {tuple(shape)}")
        count *= int(dim)
    if count > _MAX_ELEMENTS:
        raise ShapeError(f"element count {count} exceeds addressable range")
    return count


def zeros(shape: Sequence[int]) -> Tensor:
    """All-zero tensor of the given 4-tuple shape."""
    if len(shape) != 4:
        raise ShapeError(f"shape must have 4 dims, got {tuple(shape)}")
    _check_element_count(shape)
    return Tensor(np.zeros(tuple(int(d) for d in shape), dtype=np.float32), _copy=False)


def from_array(arr) -> Tensor:
    """Tensor from any array-like; data is copied and cast to float32."""
    return Tensor(np.asarray(arr))


def map_elementwise(t: Tensor, f: Callable[[float], float]) -> Tensor:
    """Apply a scalar function to every element, preserving shape.

    `f` receives each element as a float and must return a finite float
    for finite inputs. The result is cast back to float32.
    """
    if t.size == 0:
        return Tensor(t.data.copy(), _copy=False)
    flat = t.data.ravel()
    out = np.fromiter((f(x) for x in flat), dtype=np.float32, count=flat.size)
    return Tensor(out.reshape(t.shape), _copy=False)


def reduce_mean_spatial(t: Tensor) -> Tensor:
    """Mean over the height and width axes, yielding shape (batch, 1, 1, channels).

    Accumulates in float64 for accuracy, then casts back to float32.
    """
    n, h, w, c = t.shape
    if h * w == 0:
        raise EmptyReductionError(f"cannot reduce over empty spatial extent {h}x{w}")
    mean = t.data.mean(axis=(1, 2), dtype=np.float64, keepdims=True)
    return Tensor(mean.astype(np.float32), _copy=False)
