"""Feature extraction: image list -> unit-norm embedding rows -> feature file."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .models import SUPPORTED, build_model
from .preprocess import DEFAULT_BOTTOM_CROP_FRACTION, prepare_image
from .writer import write_feature_file


@dataclass(frozen=True)
class ExtractSpec:
    """One extraction run: which images, which representations, where to."""

    image_list: Path  # JSON manifest: {"items": [{"item_id", "path"}, ...]}
    repr_names: tuple[str, ...]
    out_dir: Path
    weights_dir: Path | None = None
    crop_bottom: bool = False
    crop_bottom_fraction: float = DEFAULT_BOTTOM_CROP_FRACTION
    batch_size: int = 8
    allow_random_init: bool = False
    seed: int = 0

    def __post_init__(self):
        unknown = [n for n in self.repr_names if n not in SUPPORTED]
        if unknown:
            raise ValueError(
                f"unsupported representation(s) {unknown}; supported: {', '.join(SUPPORTED)}"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def read_image_list(path) -> list[tuple[str, Path]]:
    """Ordered (item_id, image path) pairs from the image-list manifest."""
    path = Path(path)
    manifest = json.loads(path.read_text())
    items = manifest.get("items")
    if not items:
        raise ValueError(f"{path}: image list holds no items")
    out = []
    seen = set()
    for entry in items:
        item_id = str(entry["item_id"])
        if item_id in seen:
            raise ValueError(f"{path}: duplicate item_id {item_id!r}")
        seen.add(item_id)
        img = Path(entry["path"])
        if not img.is_absolute():
            img = path.parent / img
        if not img.is_file():
            raise FileNotFoundError(f"image not found: {img}")
        out.append((item_id, img))
    return out


def _embed(model, batch: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        feats = model(torch.from_numpy(batch))
    return feats.numpy().astype(np.float64)


def extract_features(spec: ExtractSpec) -> list[Path]:
    """Run every requested representation over the image list.

    Rows come out in the listing's order regardless of batching, are mean
    pooled to 1-D by the model head, and L2-normalized. Inference is pinned
    single-threaded with a fixed seed so runs are reproducible.
    """
    items = read_image_list(spec.image_list)
    fraction = spec.crop_bottom_fraction if spec.crop_bottom else 0.0
    images = np.stack([prepare_image(path, fraction) for _, path in items])
    item_ids = [item_id for item_id, _ in items]

    torch.manual_seed(spec.seed)
    torch.set_num_threads(1)
    written = []
    for name in spec.repr_names:
        weights_path = None
        if spec.weights_dir is not None:
            candidate = Path(spec.weights_dir) / f"{name}.pt"
            if candidate.is_file():
                weights_path = candidate
            elif not spec.allow_random_init:
                raise FileNotFoundError(f"missing weights: {candidate}")
        model, backbone = build_model(
            name, weights_path, allow_random_init=spec.allow_random_init
        )
        chunks = [
            _embed(model, images[start : start + spec.batch_size])
            for start in range(0, len(items), spec.batch_size)
        ]
        rows = np.concatenate(chunks, axis=0)
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        if (norms < 1e-12).any():
            raise ValueError(f"{name}: degenerate all-zero embedding row")
        rows = (rows / norms).astype(np.float32)
        manifest = write_feature_file(
            Path(spec.out_dir) / f"{name}.json",
            name,
            rows,
            item_ids,
            provenance={
                "backbone": backbone.builder,
                "penultimate": backbone.penultimate,
                "pooling": backbone.pooling,
                "weights": str(weights_path) if weights_path else "random-init",
                "crop_bottom_fraction": fraction,
                "image_list": str(spec.image_list),
            },
        )
        written.append(manifest)
    return written
