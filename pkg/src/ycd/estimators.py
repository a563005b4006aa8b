"""scikit-learn estimator wrappers around the backbone and head.

`BackboneEmbedder` is a stateless-after-fit transformer: fit() seeds and
freezes a random backbone, transform() maps image batches to pooled
embeddings. `SoftmaxHeadClassifier` is the trainable piece. Chaining the two
in a sklearn Pipeline reproduces the transfer-learning setup, and both
support get_params/set_params for grid search over the training knobs.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import model as model_mod
from .arch import build_arch
from .tensor import Tensor
from .train import TrainConfig, train_head
from .validation import as_image_batch, check_sample_count


class BackboneEmbedder(TransformerMixin, BaseEstimator):
    """Frozen random depthwise-separable backbone as a feature extractor.

    Parameters
    ----------
    alpha : width multiplier in (0, 1].
    resolution : square input size the backbone expects.
    seed : initialisation seed; fit() is deterministic given the seed.
    """

    def __init__(self, alpha=1.0, resolution=224, seed=0):
        self.alpha = alpha
        self.resolution = resolution
        self.seed = seed

    def fit(self, X=None, y=None):
        arch = build_arch(self.alpha, 1.0, base_resolution=self.resolution)
        self.arch_ = arch
        self.bundle_ = model_mod.new_bundle(arch, ("0",), self.seed)
        self.weights_ = self.bundle_.backbone_weights
        self.embedding_dim_ = arch.embedding_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        batch = as_image_batch(X, self.arch_.effective_resolution)
        rows = [
            model_mod.embed(self.bundle_, Tensor(batch[i : i + 1]))
            for i in range(len(batch))
        ]
        return np.stack(rows).astype(np.float32)

    def _more_tags(self):
        return {"requires_fit": True}


class SoftmaxHeadClassifier(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained with mini-batch SGD + momentum.

    Matches the head trained by the CLI: zero initial weights, seeded epoch
    shuffles, cross-entropy loss. Exposes `classes_`, `coef_` (K, M) and
    `intercept_` (K,) in sklearn's layout.
    """

    def __init__(self, epochs=50, batch_size=16, learning_rate=0.01,
                 momentum=0.9, shuffle_seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.shuffle_seed = shuffle_seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            shuffle_seed=self.shuffle_seed,
        )

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        check_sample_count(X.shape[0], y.shape[0] if y.ndim else 0)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        w, b, metrics = train_head(
            X, encoded, self._config(), num_classes=len(self.classes_)
        )
        self.coef_ = w.T
        self.intercept_ = b
        self.n_features_in_ = X.shape[1]
        self.training_metrics_ = metrics
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_.T + self.intercept_

    def predict_proba(self, X):
        scores = self.decision_function(X)
        shifted = scores - scores.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]
