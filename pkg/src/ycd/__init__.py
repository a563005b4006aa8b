"""Currency note recognition with a depthwise-separable convolution backbone.

The package splits into a functional core (tensor, ops, arch, costs, model,
data, train, serve, cli) and a thin scikit-learn estimator layer on top
(estimators). Everything heavy is deterministic given its seeds.
"""

__version__ = "0.1.0"

from .arch import ArchSpec, LayerSpec, build_arch, scaled_channels, scaled_resolution
from .costs import CostReport, LayerCost, count_costs
from .data import (
    DataError,
    DatasetManifest,
    SplitPolicy,
    generate_synthetic_dataset,
    load_and_preprocess,
    scan_dataset,
    split_manifest,
)
from .estimators import BackboneEmbedder, SoftmaxHeadClassifier
from .model import (
    BundleError,
    ModelBundle,
    bundles_equal,
    forward,
    load_bundle,
    new_bundle,
    save_bundle,
)
from .tensor import Shape, ShapeError, Tensor
from .train import EvalReport, TrainConfig, evaluate, train_bundle, train_head

__all__ = [
    "ArchSpec",
    "BackboneEmbedder",
    "BundleError",
    "CostReport",
    "DataError",
    "DatasetManifest",
    "EvalReport",
    "LayerCost",
    "LayerSpec",
    "ModelBundle",
    "Shape",
    "ShapeError",
    "SoftmaxHeadClassifier",
    "SplitPolicy",
    "Tensor",
    "TrainConfig",
    "build_arch",
    "bundles_equal",
    "count_costs",
    "evaluate",
    "forward",
    "generate_synthetic_dataset",
    "load_and_preprocess",
    "load_bundle",
    "new_bundle",
    "save_bundle",
    "scaled_channels",
    "scaled_resolution",
    "scan_dataset",
    "split_manifest",
    "train_bundle",
    "train_head",
]
