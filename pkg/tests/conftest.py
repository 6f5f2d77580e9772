import pytest

from helpers import build_tiny_manifest
from deepfuse.synthetic import make_synthetic_dataset, write_demo_config


@pytest.fixture(scope="session")
def synth60(tmp_path_factory):
    """The committed end-to-end data set: 3 classes, 60 samples, 3 layers, seed 1."""
    root = tmp_path_factory.mktemp("synth60")
    manifest_path = make_synthetic_dataset(root, n_samples=60, n_layers=3, seed=1)
    config_path = write_demo_config(root, manifest_path)
    return manifest_path, config_path


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    return build_tiny_manifest(tmp_path_factory.mktemp("tinyset"))
