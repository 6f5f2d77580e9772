"""Tap named modules of a CNN and write activations in the pipeline's formats.

The consumer contract is file-level: `.actv` tensors (magic "ACTV", u16
version 1, u8 dtype 1 = f32, u32 channels/height/width, little-endian
channel-major payload) and a manifest JSON with `classes`, `layers` and
`samples`. Activations are recorded at each tapped module's output, i.e.
after that module's nonlinearity when the tapped module is the nonlinearity.
Layers appear in the manifest in forward-pass order.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .models import ModelEntry, available_nodes, get_model_entry


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExportSpec:
    model_name: str
    nodes: tuple  # module names to tap
    image_dir: Path
    labels_csv: Path
    out_dir: Path
    pretrained: bool = False
    checkpoint: Optional[Path] = None
    resize: Optional[tuple] = None  # (height, width), default: model input size
    tune_epochs: int = 0
    seed: int = 0


def write_actv(path: Path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 3:
        raise ExportError(f"activation must be 3-D, got shape {values.shape}")
    d, m, n = values.shape
    header = b"ACTV" + struct.pack("<HBIII", 1, 1, d, m, n)
    path.write_bytes(header + values.tobytes())


def read_labels(labels_csv: Path) -> dict:
    """filename -> class name; accepts an optional `filename,label` header."""
    mapping = {}
    try:
        with open(labels_csv, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() == "filename":
                    continue
                if len(row) < 2:
                    raise ExportError(f"{labels_csv}: malformed row {row!r}")
                mapping[row[0].strip()] = row[1].strip()
    except OSError as exc:
        raise ExportError(f"cannot read labels file {labels_csv}: {exc}") from exc
    if not mapping:
        raise ExportError(f"{labels_csv}: no labeled samples")
    return mapping


def load_image_tensor(path: Path, entry: ModelEntry, resize: Optional[tuple]) -> torch.Tensor:
    channels, height, width = entry.input_size
    if resize is not None:
        height, width = resize
    try:
        with Image.open(path) as img:
            img = img.convert("L" if channels == 1 else "RGB")
            img = img.resize((width, height), Image.BILINEAR)
            array = np.asarray(img, dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError) as exc:
        raise ExportError(f"cannot read image {path}: {exc}") from exc
    if array.ndim == 2:
        array = array[None, :, :]
    else:
        array = array.transpose(2, 0, 1)
    tensor = torch.from_numpy(array.copy())
    if entry.normalize is not None:
        mean, std = entry.normalize
        tensor = (tensor - torch.tensor(mean)[:, None, None]) / torch.tensor(std)[:, None, None]
    return tensor.unsqueeze(0)


@dataclass
class _TapState:
    order: list = field(default_factory=list)  # node names by first execution
    outputs: dict = field(default_factory=dict)


def _register_taps(model: torch.nn.Module, nodes) -> tuple:
    modules = dict(model.named_modules())
    unknown = [n for n in nodes if n not in modules or not n]
    if unknown:
        raise ExportError(
            f"unknown nodes {unknown}; available nodes: {available_nodes(model)}"
        )
    state = _TapState()
    handles = []
    for name in nodes:
        def hook(module, inputs, output, name=name):
            if name not in state.order:
                state.order.append(name)
            state.outputs[name] = output.detach()

        handles.append(modules[name].register_forward_hook(hook))
    return state, handles


def _to_activation(name: str, output: torch.Tensor) -> np.ndarray:
    array = output.squeeze(0).cpu().numpy().astype(np.float32)
    if array.ndim == 0:
        array = array.reshape(1, 1, 1)
    elif array.ndim == 1:  # fully connected output: one channel per unit
        array = array.reshape(-1, 1, 1)
    elif array.ndim != 3:
        raise ExportError(f"node {name!r} produced a {array.ndim}-D activation")
    if not np.isfinite(array).all():
        raise ExportError(f"node {name!r} produced non-finite activations")
    return array


def build_model(spec: ExportSpec) -> torch.nn.Module:
    """The spec's network, with the checkpoint applied when one is given.

    Checkpoints carry the head's class count, so the head is swapped to match
    before the weights load.
    """
    entry = get_model_entry(spec.model_name)
    model = entry.build(spec.pretrained)
    if spec.checkpoint is not None:
        state = torch.load(spec.checkpoint, map_location="cpu", weights_only=True)
        if "__n_classes__" in state:
            entry.replace_head(model, int(state.pop("__n_classes__").item()))
        model.load_state_dict(state)
    model.eval()
    return model


def export_activations(spec: ExportSpec, model: Optional[torch.nn.Module] = None) -> Path:
    """Write one `.actv` per (sample, node) plus the manifest; returns its path."""
    entry = get_model_entry(spec.model_name)
    labels = read_labels(spec.labels_csv)
    classes = sorted(set(labels.values()))
    torch.manual_seed(spec.seed)
    if model is None:
        model = build_model(spec)
    model.eval()

    state, handles = _register_taps(model, spec.nodes)
    tensor_dir = spec.out_dir / "tensors"
    tensor_dir.mkdir(parents=True, exist_ok=True)

    layer_dims: dict = {}
    samples = []
    try:
        for filename in sorted(labels):
            image_path = spec.image_dir / filename
            batch = load_image_tensor(image_path, entry, spec.resize)
            state.outputs.clear()
            with torch.no_grad():
                model(batch)
            missing = [n for n in spec.nodes if n not in state.outputs]
            if missing:
                raise ExportError(
                    f"nodes {missing} never executed in the forward pass"
                )
            sample_id = Path(filename).stem
            tensor_paths = {}
            for node in spec.nodes:
                array = _to_activation(node, state.outputs[node])
                dims = array.shape
                if node in layer_dims and layer_dims[node] != dims:
                    raise ExportError(
                        f"node {node!r} changed dims across samples: "
                        f"{layer_dims[node]} vs {dims}"
                    )
                layer_dims[node] = dims
                safe_node = node.replace(".", "_")
                rel = f"tensors/{sample_id}__{safe_node}.actv"
                write_actv(spec.out_dir / rel, array)
                tensor_paths[node] = rel
            samples.append(
                {
                    "id": sample_id,
                    "label": classes.index(labels[filename]),
                    "tensors": tensor_paths,
                }
            )
    finally:
        for handle in handles:
            handle.remove()

    ordered_nodes = [n for n in state.order if n in spec.nodes]
    manifest = {
        "classes": classes,
        "layers": [
            {
                "id": node,
                "d": layer_dims[node][0],
                "m": layer_dims[node][1],
                "n": layer_dims[node][2],
            }
            for node in ordered_nodes
        ],
        "samples": samples,
    }
    manifest_path = spec.out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
