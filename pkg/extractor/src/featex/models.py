"""Backbone registry for the supported representation names.

Each representation maps to a torchvision-buildable backbone truncated at
its penultimate feature map plus a pooling head that yields a 1-D vector of
512..2048 dimensions. Checkpoints are user-supplied; the registry only fixes
architecture and pooling so a loaded state dict reproduces its features.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models as tvm


class GeMPool(nn.Module):
    """Generalized-mean pooling over the spatial grid (p=3, eps-clamped)."""

    def __init__(self, p: float = 3.0, eps: float = 1e-6):
        super().__init__()
        self.p = p
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        clamped = x.clamp(min=self.eps)
        pooled = clamped.pow(self.p).mean(dim=(2, 3)).pow(1.0 / self.p)
        return pooled


class GAPPool(nn.Module):
    """Global average pooling of the penultimate feature map."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x.mean(dim=(2, 3))


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    builder: str  # torchvision constructor name
    pooling: str  # "gap" or "gem"
    dim: int
    penultimate: str  # provenance note: which feature map feeds the pool


# The eleven supported representation names. Backbones follow each method's
# published base network where torchvision provides it; pooling produces the
# 1-D embedding. Checkpoints define the actual weights.
REGISTRY: dict[str, BackboneSpec] = {
    "conv": BackboneSpec("conv", "densenet121", "gap", 1024, "densenet121.features"),
    "ret": BackboneSpec("ret", "resnet101", "gem", 2048, "resnet101.layer4"),
    "ret_w": BackboneSpec("ret_w", "resnet101", "gem", 2048, "resnet101.layer4"),
    "shp": BackboneSpec("shp", "resnet101", "gem", 2048, "resnet101.layer4"),
    "weaka": BackboneSpec("weaka", "resnet101", "gap", 2048, "resnet101.layer4"),
    "pl18": BackboneSpec("pl18", "resnet18", "gap", 512, "resnet18.layer4"),
    "pl50": BackboneSpec("pl50", "resnet50", "gap", 2048, "resnet50.layer4"),
    "pose": BackboneSpec("pose", "resnet18", "gap", 512, "resnet18.layer4"),
    "texture": BackboneSpec("texture", "resnet50", "gap", 2048, "resnet50.layer4"),
    "texture_SI": BackboneSpec("texture_SI", "resnet50", "gap", 2048, "resnet50.layer4"),
    "texture_SII": BackboneSpec("texture_SII", "resnet50", "gap", 2048, "resnet50.layer4"),
}

SUPPORTED = tuple(sorted(REGISTRY))


def _trunk(builder: str) -> nn.Module:
    ctor = getattr(tvm, builder)
    net = ctor(weights=None)
    if builder.startswith("resnet"):
        return nn.Sequential(*list(net.children())[:-2])  # drop avgpool + fc
    if builder.startswith("densenet"):
        return nn.Sequential(net.features, nn.ReLU(inplace=True))
    raise ValueError(f"unsupported builder {builder!r}")


def build_model(repr_name: str, weights_path=None, allow_random_init: bool = False):
    """Backbone + pooling head for one representation, in eval mode.

    Loads a user-supplied state dict when ``weights_path`` is given;
    otherwise requires ``allow_random_init`` (pipeline testing only).
    """
    if repr_name not in REGISTRY:
        raise ValueError(
            f"unknown representation {repr_name!r}; supported: {', '.join(SUPPORTED)}"
        )
    spec = REGISTRY[repr_name]
    trunk = _trunk(spec.builder)
    pool = GeMPool() if spec.pooling == "gem" else GAPPool()
    model = nn.Sequential(trunk, pool)
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    elif not allow_random_init:
        raise FileNotFoundError(
            f"{repr_name}: no weights supplied; pass a checkpoint or "
            "--allow-random-init for pipeline testing"
        )
    model.eval()
    return model, spec
