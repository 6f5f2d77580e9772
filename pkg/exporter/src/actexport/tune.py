"""Best-effort fine-tuning: swap the classification head, train a few epochs.

Tuning is seeded end to end (shuffling, new-head init), so a tune-then-export
run is reproducible. With zero epochs the checkpoint simply freezes the
pretrained weights plus the class count.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .export import ExportError, ExportSpec, load_image_tensor, read_labels
from .models import get_model_entry


@dataclass(frozen=True)
class TuneReport:
    checkpoint: Path
    epochs: int
    accuracy_before: float
    accuracy_after: float


def _training_accuracy(model: nn.Module, batches, labels) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for batch, label in zip(batches, labels):
            correct += int(model(batch).argmax(dim=1).item() == label)
    return correct / len(labels)


def fine_tune(spec: ExportSpec, learning_rate: float = 0.05) -> TuneReport:
    """Train the spec's model on its labeled images; save a loadable checkpoint."""
    entry = get_model_entry(spec.model_name)
    label_map = read_labels(spec.labels_csv)
    classes = sorted(set(label_map.values()))
    if len(classes) < 2:
        raise ExportError(f"fine-tuning needs at least 2 classes, got {classes}")

    torch.manual_seed(spec.seed)
    model = entry.build(spec.pretrained)
    entry.replace_head(model, len(classes))

    filenames = sorted(label_map)
    batches = [
        load_image_tensor(spec.image_dir / name, entry, spec.resize)
        for name in filenames
    ]
    labels = [classes.index(label_map[name]) for name in filenames]

    accuracy_before = _training_accuracy(model, batches, labels)
    if spec.tune_epochs > 0:
        optimizer = torch.optim.SGD(model.parameters(), lr=learning_rate, momentum=0.9)
        loss_fn = nn.CrossEntropyLoss()
        generator = torch.Generator().manual_seed(spec.seed)
        model.train()
        for _ in range(spec.tune_epochs):
            for i in torch.randperm(len(batches), generator=generator).tolist():
                optimizer.zero_grad()
                loss = loss_fn(model(batches[i]), torch.tensor([labels[i]]))
                loss.backward()
                optimizer.step()
    accuracy_after = _training_accuracy(model, batches, labels)

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = spec.out_dir / "checkpoint.pt"
    state = dict(model.state_dict())
    state["__n_classes__"] = torch.tensor(len(classes))
    torch.save(state, checkpoint)
    return TuneReport(
        checkpoint=checkpoint,
        epochs=spec.tune_epochs,
        accuracy_before=accuracy_before,
        accuracy_after=accuracy_after,
    )
