"""Activation tensors, their on-disk format, dataset manifests and CV folds.

Tensor file layout (extension ``.actv``), little-endian throughout:

    bytes 0-3    magic ``ACTV``
    bytes 4-5    format version, u16 (currently 1)
    byte  6      dtype code, u8 (1 = 32-bit float)
    bytes 7-18   channels, height, width as u32 each
    bytes 19-    channels*height*width f32 values, channel-major
                 (channel 0 row-major, then channel 1, ...)
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"ACTV"
FORMAT_VERSION = 1
DTYPE_F32 = 1

_HEADER = struct.Struct("<HBIII")  # version, dtype, channels, height, width
HEADER_SIZE = len(MAGIC) + _HEADER.size


@dataclass(frozen=True)
class ActivationTensor:
    """One sample's activation at one layer: ``values`` has shape (D, M, N).

    Fully connected layers are represented with M = N = 1.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValidationError(f"activation tensor must be 3-D, got shape {v.shape}")
        if min(v.shape) < 1:
            raise ValidationError(f"activation dims must be >= 1, got {v.shape}")
        if not np.isfinite(v).all():
            offset = int(np.flatnonzero(~np.isfinite(v.reshape(-1)))[0])
            raise ValidationError(f"non-finite activation value at offset {offset}")
        object.__setattr__(self, "values", np.ascontiguousarray(v))

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def flatten(tensor: ActivationTensor) -> np.ndarray:
    """Channel-major feature vector; channel c occupies [c*M*N, (c+1)*M*N)."""
    return tensor.values.reshape(-1)


def write_tensor(tensor: ActivationTensor, destination) -> None:
    d, m, n = tensor.values.shape
    header = MAGIC + _HEADER.pack(FORMAT_VERSION, DTYPE_F32, d, m, n)
    payload = np.ascontiguousarray(tensor.values, dtype="<f4").tobytes()
    try:
        with open(destination, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write tensor to {destination}: {exc}") from exc


def read_tensor(source) -> ActivationTensor:
    with open(source, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{source}: truncated header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{source}: bad magic {raw[:4]!r}")
    version, dtype, d, m, n = _HEADER.unpack_from(raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{source}: unsupported format version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{source}: unsupported dtype code {dtype}")
    expected = HEADER_SIZE + d * m * n * 4
    if len(raw) != expected:
        raise FormatError(
            f"{source}: payload length mismatch (expected {expected} bytes, got {len(raw)})"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(d, m, n)
    if not np.isfinite(values).all():
        offset = int(np.flatnonzero(~np.isfinite(values.reshape(-1)))[0])
        raise ValidationError(f"{source}: non-finite payload value at offset {offset}")
    return ActivationTensor(values.copy())


@dataclass(frozen=True)
class LayerInfo:
    id: str
    channels: int
    height: int
    width: int

    @property
    def flat_dim(self) -> int:
        return self.channels * self.height * self.width


@dataclass(frozen=True)
class SampleInfo:
    id: str
    label: int
    tensors: dict  # layer id -> relative path


@dataclass(frozen=True)
class DatasetManifest:
    """Sample ids, class labels and per-layer tensor paths for one data set."""

    classes: tuple
    layers: tuple  # of LayerInfo, in network order
    samples: tuple  # of SampleInfo
    base_dir: Path = field(default_factory=Path)

    def validate(self) -> None:
        if len(self.classes) < 2:
            raise ValidationError("manifest needs at least 2 classes")
        layer_ids = [layer.id for layer in self.layers]
        if len(set(layer_ids)) != len(layer_ids):
            raise ValidationError("duplicate layer ids in manifest")
        for lid in layer_ids:
            if ":" in lid:
                raise ValidationError(f"layer id {lid!r} may not contain ':'")
        sample_ids = [s.id for s in self.samples]
        if len(set(sample_ids)) != len(sample_ids):
            raise ValidationError("duplicate sample ids in manifest")
        counts = [0] * len(self.classes)
        for s in self.samples:
            if not 0 <= s.label < len(self.classes):
                raise ValidationError(f"sample {s.id!r}: label {s.label} out of range")
            counts[s.label] += 1
            if set(s.tensors) != set(layer_ids):
                missing = set(layer_ids) - set(s.tensors)
                extra = set(s.tensors) - set(layer_ids)
                raise ValidationError(
                    f"sample {s.id!r}: tensor map mismatch"
                    f" (missing {sorted(missing)}, unknown {sorted(extra)})"
                )
        for cls, cnt in zip(self.classes, counts):
            if cnt < 2:
                raise ValidationError(f"class {cls!r} has {cnt} samples, need >= 2")

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.intp)

    def layer(self, layer_id: str) -> LayerInfo:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(layer_id)

    def tensor_path(self, sample: SampleInfo, layer_id: str) -> Path:
        return self.base_dir / sample.tensors[layer_id]

    def load_tensor(self, sample: SampleInfo, layer_id: str) -> ActivationTensor:
        tensor = read_tensor(self.tensor_path(sample, layer_id))
        layer = self.layer(layer_id)
        if tensor.values.shape != (layer.channels, layer.height, layer.width):
            raise ValidationError(
                f"sample {sample.id!r} layer {layer_id!r}: file dims "
                f"{tensor.values.shape} do not match declared "
                f"({layer.channels}, {layer.height}, {layer.width})"
            )
        return tensor


def _require_keys(obj: dict, required, context: str, optional=()) -> None:
    missing = [k for k in required if k not in obj]
    unknown = [k for k in obj if k not in required and k not in optional]
    if missing:
        raise FormatError(f"{context}: missing keys {missing}")
    if unknown:
        raise FormatError(f"{context}: unknown keys {unknown}")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    _require_keys(doc, ("classes", "layers", "samples"), str(path))
    layers = []
    for entry in doc["layers"]:
        _require_keys(entry, ("id", "d", "m", "n"), f"{path} layer entry")
        layers.append(LayerInfo(str(entry["id"]), int(entry["d"]), int(entry["m"]), int(entry["n"])))
    samples = []
    for entry in doc["samples"]:
        _require_keys(entry, ("id", "label", "tensors"), f"{path} sample entry")
        samples.append(
            SampleInfo(str(entry["id"]), int(entry["label"]), dict(entry["tensors"]))
        )
    manifest = DatasetManifest(
        classes=tuple(str(c) for c in doc["classes"]),
        layers=tuple(layers),
        samples=tuple(samples),
        base_dir=path.parent,
    )
    manifest.validate()
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "classes": list(manifest.classes),
        "layers": [
            {"id": l.id, "d": l.channels, "m": l.height, "n": l.width}
            for l in manifest.layers
        ],
        "samples": [
            {"id": s.id, "label": s.label, "tensors": dict(sorted(s.tensors.items()))}
            for s in manifest.samples
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class FoldSpec:
    k: int
    assignment: np.ndarray  # per-sample fold index in [0, k)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


def stratified_folds(labels, k: int, seed: int) -> FoldSpec:
    """Deterministic stratified fold assignment.

    Within each class the samples are shuffled (seeded) and dealt round-robin,
    so per-class fold sizes differ by at most one.
    """
    if k < 2:
        raise ValueError(f"fold count must be >= 2, got {k}")
    labels = np.asarray(labels, dtype=np.intp)
    assignment = np.empty(len(labels), dtype=np.intp)
    rng = np.random.default_rng(seed)
    cursor = 0  # carries across classes so overall fold sizes stay even too
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            warnings.warn(
                f"class {cls} has {len(idx)} samples for {k} folds; "
                "some folds will not contain it",
                stacklevel=2,
            )
        perm = rng.permutation(idx)
        assignment[perm] = (cursor + np.arange(len(perm))) % k
        cursor += len(perm)
    return FoldSpec(k=k, assignment=assignment)
