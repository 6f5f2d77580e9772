"""Model registry: pretrained-zoo architectures plus tiny test networks.

Every entry knows how to build its network, what input it expects, and how to
swap the classification head for fine-tuning. Tiny networks are seeded so two
constructions are weight-identical, which keeps exports reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import torch
from torch import nn


class UnknownModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelEntry:
    name: str
    build: Callable[[bool], nn.Module]  # pretrained flag -> module
    input_size: tuple  # (channels, height, width)
    replace_head: Callable[[nn.Module, int], None]
    normalize: Optional[tuple] = None  # (mean, std) per channel


class IdentityNet(nn.Module):
    """Passes its input through unchanged; the canonical 1x1 test network."""

    def __init__(self):
        super().__init__()
        self.identity = nn.Identity()
        self.head = nn.Identity()

    def forward(self, x):
        return self.head(self.identity(x))


class TinyCnn(nn.Module):
    """A 2-block CNN small enough to fine-tune on a handful of toy images."""

    def __init__(self, n_classes: int = 3):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 4, kernel_size=3, padding=1)
        self.relu1 = nn.ReLU()
        self.pool1 = nn.MaxPool2d(2)
        self.conv2 = nn.Conv2d(4, 8, kernel_size=3, padding=1)
        self.relu2 = nn.ReLU()
        self.pool2 = nn.AdaptiveAvgPool2d(2)
        self.flatten = nn.Flatten()
        self.fc = nn.Linear(8 * 2 * 2, n_classes)

    def forward(self, x):
        x = self.pool1(self.relu1(self.conv1(x)))
        x = self.pool2(self.relu2(self.conv2(x)))
        return self.fc(self.flatten(x))


def _seeded(builder):
    def build(pretrained: bool) -> nn.Module:
        # fixed init so an untuned export is reproducible run to run
        torch.manual_seed(0)
        return builder()

    return build


def _replace_linear_head(attr: str):
    def replace(model: nn.Module, n_classes: int) -> None:
        old = getattr(model, attr)
        setattr(model, attr, nn.Linear(old.in_features, n_classes))

    return replace


def _no_head(model: nn.Module, n_classes: int) -> None:
    raise ValueError("this model has no trainable classification head")


def _torchvision_build(name: str):
    def build(pretrained: bool) -> nn.Module:
        from torchvision import models as tv

        weights = "IMAGENET1K_V1" if pretrained else None
        factory = getattr(tv, name)
        torch.manual_seed(0)
        return factory(weights=weights)

    return build


_IMAGENET_NORM = ((0.485, 0.456, 0.406), (0.229, 0.224, 0.225))

REGISTRY = {
    "identity": ModelEntry(
        name="identity",
        build=_seeded(IdentityNet),
        input_size=(1, 1, 1),
        replace_head=_no_head,
    ),
    "tinycnn": ModelEntry(
        name="tinycnn",
        build=_seeded(TinyCnn),
        input_size=(3, 8, 8),
        replace_head=_replace_linear_head("fc"),
    ),
    "resnet50": ModelEntry(
        name="resnet50",
        build=_torchvision_build("resnet50"),
        input_size=(3, 224, 224),
        replace_head=_replace_linear_head("fc"),
        normalize=_IMAGENET_NORM,
    ),
    "googlenet": ModelEntry(
        name="googlenet",
        build=_torchvision_build("googlenet"),
        input_size=(3, 224, 224),
        replace_head=_replace_linear_head("fc"),
        normalize=_IMAGENET_NORM,
    ),
    "densenet201": ModelEntry(
        name="densenet201",
        build=_torchvision_build("densenet201"),
        input_size=(3, 224, 224),
        replace_head=_replace_linear_head("classifier"),
        normalize=_IMAGENET_NORM,
    ),
}


def get_model_entry(name: str) -> ModelEntry:
    if name not in REGISTRY:
        raise UnknownModelError(
            f"unknown model {name!r}; available: {sorted(REGISTRY)}"
        )
    return REGISTRY[name]


def available_nodes(model: nn.Module) -> list:
    """Module names that can be tapped, in definition order."""
    return [name for name, _ in model.named_modules() if name]
