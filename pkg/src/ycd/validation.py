"""Input validation shared by the estimator layer.

Embedding matrices go through scikit-learn's own checks; these helpers cover
the image-batch shapes sklearn has no notion of.
"""
from __future__ import annotations

import numpy as np

from .arch import IMAGE_CHANNELS


def as_image_batch(X, resolution: int) -> np.ndarray:
    """Coerce X to a (n, resolution, resolution, 3) float32 batch.

    Accepts a single (h, w, 3) image or a batch; rejects anything whose
    spatial size or channel count disagrees with the backbone.
    """
    arr = np.asarray(X, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[np.newaxis]
    if arr.ndim != 4:
        raise ValueError(
            f"expected image batch with 4 dims (n, h, w, c), got shape {arr.shape}"
        )
    n, h, w, c = arr.shape
    if c != IMAGE_CHANNELS:
        raise ValueError(f"expected {IMAGE_CHANNELS} channels, got {c}")
    if (h, w) != (resolution, resolution):
        raise ValueError(
            f"expected {resolution}x{resolution} input, got {h}x{w}; "
            f"resize before calling"
        )
    if not np.isfinite(arr).all():
        raise ValueError("image batch contains non-finite values")
    return arr


def check_sample_count(n_samples: int, n_labels: int):
    if n_samples != n_labels:
        raise ValueError(
            f"X has {n_samples} samples but y has {n_labels} labels"
        )
