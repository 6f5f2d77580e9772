import numpy as np

from deepfuse.tensor_store import (
    ActivationTensor,
    DatasetManifest,
    LayerInfo,
    SampleInfo,
    save_manifest,
    write_tensor,
)


def build_tiny_manifest(root, n_samples=18, n_classes=3, seed=0, separation=5.0):
    """A small all-raw data set (every layer under the reduction threshold).

    Layer `conv` is 2x3x3 with class-coded channel means; layer `fc` is a
    4-vector with the class index one-hot at 5 sigma.
    """
    rng = np.random.default_rng(seed)
    tensor_dir = root / "tensors"
    tensor_dir.mkdir(parents=True, exist_ok=True)
    layers = (LayerInfo("conv", 2, 3, 3), LayerInfo("fc", 4, 1, 1))
    samples = []
    for s in range(n_samples):
        label = s % n_classes
        conv = rng.normal(0.0, 1.0, (2, 3, 3))
        conv[label % 2] += separation * (label + 1) / n_classes
        fc = rng.normal(0.0, 1.0, (4, 1, 1))
        fc[label] += separation
        paths = {}
        for layer_id, values in (("conv", conv), ("fc", fc)):
            rel = f"tensors/s{s:02d}_{layer_id}.actv"
            write_tensor(ActivationTensor(values.astype(np.float32)), root / rel)
            paths[layer_id] = rel
        samples.append(SampleInfo(id=f"s{s:02d}", label=label, tensors=paths))
    manifest = DatasetManifest(
        classes=tuple(f"c{i}" for i in range(n_classes)),
        layers=layers,
        samples=tuple(samples),
        base_dir=root,
    )
    manifest.validate()
    save_manifest(manifest, root / "manifest.json")
    return manifest
