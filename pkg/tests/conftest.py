import numpy as np
import pytest

from ycd import data as data_mod
from ycd import model as model_mod
from ycd import train as train_mod
from ycd.arch import build_arch

ACCEPT_ALPHA = 0.5
ACCEPT_RESOLUTION = 96
ACCEPT_SEED = 0


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """3 classes x 8 images at 24 px; enough for structural tests."""
    root = tmp_path_factory.mktemp("tiny_data")
    manifest = data_mod.generate_synthetic_dataset(
        root, k_classes=3, n_per_class=8, resolution=24, seed=11
    )
    return root, manifest


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """The full 4x400 dataset used by training-level tests."""
    root = tmp_path_factory.mktemp("synth_data")
    manifest = data_mod.generate_synthetic_dataset(
        root, k_classes=4, n_per_class=400, resolution=96, seed=ACCEPT_SEED
    )
    return root, manifest


@pytest.fixture(scope="session")
def split_manifest_full(synth_dataset):
    _, manifest = synth_dataset
    return data_mod.split_manifest(
        manifest, data_mod.SplitPolicy("auto"), ACCEPT_SEED
    )


@pytest.fixture(scope="session")
def trained(split_manifest_full):
    """One full training run shared by evaluation/service tests."""
    arch = build_arch(ACCEPT_ALPHA, 1.0, base_resolution=ACCEPT_RESOLUTION)
    cfg = train_mod.TrainConfig()
    return train_mod.train_bundle(
        split_manifest_full, arch, cfg, init_seed=ACCEPT_SEED
    )


@pytest.fixture(scope="session")
def embeddings_full(split_manifest_full):
    """Cached train/test embedding sets from an untrained bundle."""
    arch = build_arch(ACCEPT_ALPHA, 1.0, base_resolution=ACCEPT_RESOLUTION)
    bundle = model_mod.new_bundle(arch, split_manifest_full.classes, ACCEPT_SEED)
    train_set = train_mod.extract_embeddings(bundle, split_manifest_full, "train")
    test_set = train_mod.extract_embeddings(bundle, split_manifest_full, "test")
    return bundle, train_set, test_set


def small_arch(resolution: int = 32, alpha: float = 0.25):
    return build_arch(alpha, 1.0, base_resolution=resolution)


@pytest.fixture(scope="session")
def small_bundle():
    arch = small_arch()
    return model_mod.new_bundle(arch, ("100", "250", "500"), seed=3)


def rand_image(resolution: int, seed: int = 0):
    from ycd.tensor import Tensor

    rng = np.random.default_rng(seed)
    arr = rng.uniform(-1.0, 1.0, size=(1, resolution, resolution, 3))
    return Tensor(arr.astype(np.float32))
