"""Seeded synthetic galleries and independent brute-force oracles.

Galleries are generated from the portable xoshiro256** stream so the same
spec and seed produce byte-identical files on any platform. The brute-force
recall oracle recomputes everything from raw feature rows per subset with no
matrix caching and no incremental tricks; it exists to cross-check the
pipeline in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .patch import ActivationStack, Triple2AFC
from .rng import Xoshiro256StarStar
from .store import (
    FeatureSet,
    PairedGallery,
    write_feature_set,
    write_gallery_manifest,
)

BRUTE_FORCE_MAX_N = 256


@dataclass(frozen=True)
class SynthSpec:
    """Deterministic recipe for a paired gallery with planted matches.

    ``signal_sets[m]`` lists the pair indices whose right-side feature under
    representation m is the left feature plus Gaussian noise (renormalized);
    every other feature is an independent uniform point on the unit sphere.
    """

    n_pairs: int
    n_reprs: int
    dim: int
    signal_sets: tuple[tuple[int, ...], ...]
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_pairs < 1 or self.n_reprs < 1 or self.dim < 1:
            raise ValueError("n_pairs, n_reprs, and dim must all be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if len(self.signal_sets) != self.n_reprs:
            raise ValueError(
                f"{len(self.signal_sets)} signal sets for {self.n_reprs} representations"
            )
        canon = []
        for m, signal in enumerate(self.signal_sets):
            indices = sorted(set(int(i) for i in signal))
            if indices and not 0 <= indices[0] <= indices[-1] < self.n_pairs:
                raise ValueError(f"signal set {m} has indices outside [0, {self.n_pairs})")
            canon.append(tuple(indices))
        object.__setattr__(self, "signal_sets", tuple(canon))

    def repr_names(self) -> tuple[str, ...]:
        # Zero-padded so lexicographic order equals index order.
        return tuple(f"r{m:02d}" for m in range(self.n_reprs))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_pairs": self.n_pairs,
                "n_reprs": self.n_reprs,
                "dim": self.dim,
                "signal_sets": [list(s) for s in self.signal_sets],
                "noise_sigma": self.noise_sigma,
                "seed": self.seed,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        raw = json.loads(text)
        return cls(
            n_pairs=int(raw["n_pairs"]),
            n_reprs=int(raw["n_reprs"]),
            dim=int(raw["dim"]),
            signal_sets=tuple(tuple(int(i) for i in s) for s in raw["signal_sets"]),
            noise_sigma=float(raw.get("noise_sigma", 0.0)),
            seed=int(raw.get("seed", 0)),
        )


def _generate_rows(spec: SynthSpec):
    """Left and right float32 row blocks per representation, stream order:
    for each representation, all left rows then all right rows."""
    rng = Xoshiro256StarStar(spec.seed)
    sides = []
    for m in range(spec.n_reprs):
        signal = set(spec.signal_sets[m])
        left = np.array(
            [rng.unit_vector(spec.dim) for _ in range(spec.n_pairs)], dtype=np.float64
        )
        right = np.empty_like(left)
        for i in range(spec.n_pairs):
            if i in signal:
                if spec.noise_sigma == 0.0:
                    right[i] = left[i]  # exact copy, bit-identical after f32 cast
                else:
                    noisy = left[i] + spec.noise_sigma * np.array(
                        rng.gauss_vector(spec.dim)
                    )
                    right[i] = noisy / np.sqrt((noisy**2).sum())
            else:
                right[i] = rng.unit_vector(spec.dim)
        sides.append((left.astype(np.float32), right.astype(np.float32)))
    return sides


def generate_gallery(spec: SynthSpec) -> PairedGallery:
    """Build the gallery in memory; fully deterministic per seed."""
    names = spec.repr_names()
    item_ids = tuple(f"pair{i:05d}" for i in range(spec.n_pairs))
    left, right = [], []
    for name, (l_rows, r_rows) in zip(names, _generate_rows(spec)):
        left.append(FeatureSet(name, l_rows, item_ids))
        right.append(FeatureSet(name, r_rows, item_ids))
    return PairedGallery(
        n_pairs=spec.n_pairs,
        representations=names,
        left=tuple(left),
        right=tuple(right),
    )


def write_synth_gallery(spec: SynthSpec, out_dir) -> Path:
    """Write the gallery as feature-store files plus a gallery manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gallery = generate_gallery(spec)
    entries = []
    for name, l_fs, r_fs in zip(gallery.representations, gallery.left, gallery.right):
        l_name, r_name = f"{name}_left.json", f"{name}_right.json"
        write_feature_set(l_fs.rows, name, l_fs.item_ids, out_dir / l_name)
        write_feature_set(r_fs.rows, name, r_fs.item_ids, out_dir / r_name)
        entries.append((name, l_name, r_name))
    manifest = write_gallery_manifest(out_dir / "gallery.json", spec.n_pairs, entries)
    (out_dir / "synth_spec.json").write_text(spec.to_json() + "\n")
    return manifest


def brute_force_recall(
    gallery: PairedGallery, subset_indices, mode: str = "raw", k: int = 1
) -> int:
    """Recall@k recomputed from raw feature rows, naively, per subset.

    Per selected representation the cosine of a pair is a fresh float64 dot
    product rounded to float32 (the declared matrix storage precision);
    normalized mode re-derives each representation's mean and population
    std with a two-pass sweep. Nothing is cached across subsets or reused
    from the pipeline. Enforced small-N guard keeps this test-only.
    """
    n = gallery.n_pairs
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute_force_recall is capped at N={BRUTE_FORCE_MAX_N}")
    subset = sorted(set(int(i) for i in subset_indices))
    if not subset:
        raise ValueError("subset must be non-empty")
    if mode not in ("raw", "normalized"):
        raise ValueError(f"unknown mode {mode!r}")

    def cosine_row(m: int, i: int) -> np.ndarray:
        left = gallery.left[m].rows[i].astype(np.float64)
        right = gallery.right[m].rows.astype(np.float64)
        return (right @ left).astype(np.float32)

    params = {}
    if mode == "normalized":
        for m in subset:
            total = 0.0
            for i in range(n):
                total += float(cosine_row(m, i).astype(np.float64).sum())
            mean = total / (n * n)
            ss = 0.0
            for i in range(n):
                dev = cosine_row(m, i).astype(np.float64) - mean
                ss += float((dev * dev).sum())
            params[m] = (mean, np.sqrt(ss / (n * n)))

    count = 0
    for i in range(n):
        fused = np.zeros(n, dtype=np.float64)
        for m in subset:
            row = cosine_row(m, i).astype(np.float64)
            if mode == "normalized":
                mean, std = params[m]
                if std < 1e-9:
                    continue
                fused += (row - mean) / std
            else:
                fused += row
        order = np.argsort(-fused, kind="stable")
        if i in order[:k]:
            count += 1
    return count


def generate_2afc_items(
    n_items: int,
    layer_shapes,
    planted_layer: int,
    seed: int,
    close_sigma: float = 0.05,
    far_sigma: float = 0.5,
) -> list[Triple2AFC]:
    """Triples where only the planted layer separates the preferred patch.

    At every other layer p0 and p1 receive the same perturbation of the
    reference, so their distances cancel exactly; at the planted layer one
    patch (chosen per item from the stream) sits closer. ``human_pref`` is
    0.9 toward the truly-closer patch.
    """
    if n_items < 1:
        raise ValueError("n_items must be >= 1")
    shapes = [tuple(int(v) for v in s) for s in layer_shapes]
    if not shapes or any(len(s) != 3 or min(s) < 1 for s in shapes):
        raise ValueError("layer_shapes must be non-empty (H, W, C) triples")
    if not 0 <= planted_layer < len(shapes):
        raise IndexError(f"planted layer {planted_layer} out of range")
    rng = Xoshiro256StarStar(seed)

    def draw(shape, scale=1.0):
        h, w, c = shape
        flat = np.array(rng.gauss_vector(h * w * c), dtype=np.float64) * scale
        return flat.reshape(shape).astype(np.float32)

    items = []
    for _ in range(n_items):
        ref_layers, p0_layers, p1_layers = [], [], []
        p1_wins = rng.next_u64() & 1 == 1  # p1 is the truly-closer patch
        for idx, shape in enumerate(shapes):
            ref = draw(shape)
            ref_layers.append(ref)
            if idx == planted_layer:
                close = ref + draw(shape, close_sigma)
                far = ref + draw(shape, far_sigma)
                p0_layers.append(far if p1_wins else close)
                p1_layers.append(close if p1_wins else far)
            else:
                shared = ref + draw(shape, far_sigma)
                p0_layers.append(shared)
                p1_layers.append(shared.copy())
        items.append(
            Triple2AFC(
                ref=ActivationStack(tuple(ref_layers)),
                p0=ActivationStack(tuple(p0_layers)),
                p1=ActivationStack(tuple(p1_layers)),
                human_pref=0.9 if p1_wins else 0.1,
            )
        )
    return items
