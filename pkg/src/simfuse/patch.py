"""Layer-weighted perceptual patch distance and 2AFC scoring.

The distance between two activation stacks is the spatially-averaged,
per-channel-weighted squared difference of channel-unit-normalized
activations, summed over layers:

    d(x, x0) = sum_l (1 / (H_l * W_l)) * sum_hw || w_l * (x_hw - x0_hw) ||^2

Judging a <ref, p0, p1> triple picks whichever distorted patch is closer to
the reference; an item's score is the fraction of human annotators agreeing
with that choice.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .tensorfile import (
    FormatError,
    from_f32_bytes,
    read_manifest,
    read_payload,
    to_f32_bytes,
    write_manifest,
    write_payload,
)

# Positions whose channel vector is this small normalize to the zero vector
# (all-zero ReLU outputs are legitimate).
CHANNEL_NORM_FLOOR = 1e-10
# Distance differences at or below this count as a tie (credit 0.5).
TIE_TOLERANCE = 1e-12

Choice = Literal["p0", "p1", "tie"]


@dataclass(frozen=True)
class ActivationStack:
    """Per-layer activations, each layer shaped (H, W, C)."""

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("activation stack needs at least one layer")
        fixed = []
        for idx, layer in enumerate(self.layers):
            arr = np.asarray(layer, dtype=np.float32)
            if arr.ndim != 3 or min(arr.shape) < 1:
                raise ValueError(f"layer {idx}: expected (H, W, C) with all dims >= 1")
            if not np.isfinite(arr).all():
                raise ValueError(f"layer {idx}: activations contain NaN or Inf")
            fixed.append(arr)
        object.__setattr__(self, "layers", tuple(fixed))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def shapes(self) -> tuple[tuple[int, int, int], ...]:
        return tuple(layer.shape for layer in self.layers)


@dataclass(frozen=True)
class LayerWeights:
    """One non-negative weight per channel per layer."""

    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for idx, w in enumerate(self.weights):
            arr = np.asarray(w, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"layer {idx}: weights must be a 1-D vector")
            if (arr < 0).any() or not np.isfinite(arr).all():
                raise ValueError(f"layer {idx}: weights must be finite and >= 0")
            fixed.append(arr)
        object.__setattr__(self, "weights", tuple(fixed))

    @classmethod
    def uniform(cls, channel_counts) -> "LayerWeights":
        return cls(tuple(np.ones(int(c), dtype=np.float64) for c in channel_counts))

    @classmethod
    def for_stack(cls, stack: ActivationStack) -> "LayerWeights":
        return cls.uniform(shape[2] for shape in stack.shapes())


@dataclass(frozen=True)
class Triple2AFC:
    """Reference and two distorted stacks plus the human preference for p1."""

    ref: ActivationStack
    p0: ActivationStack
    p1: ActivationStack
    human_pref: float

    def __post_init__(self):
        shapes = self.ref.shapes()
        if self.p0.shapes() != shapes or self.p1.shapes() != shapes:
            raise ValueError("ref, p0, p1 must share layer shapes")
        if not 0.0 <= self.human_pref <= 1.0:
            raise ValueError(f"human_pref must be in [0, 1], got {self.human_pref}")


@dataclass(frozen=True)
class TwoAFCScore:
    distortion_name: str
    score: float
    n_items: int


def channel_normalize(s: ActivationStack) -> ActivationStack:
    """Scale each spatial position's channel vector to unit L2 norm.

    Vectors with norm below ``CHANNEL_NORM_FLOOR`` map to zero.
    """
    out = []
    for layer in s.layers:
        norms = np.sqrt((layer.astype(np.float64) ** 2).sum(axis=2, keepdims=True))
        safe = np.where(norms < CHANNEL_NORM_FLOOR, 1.0, norms)
        normed = (layer / safe).astype(np.float32)
        normed[np.broadcast_to(norms < CHANNEL_NORM_FLOOR, layer.shape)] = 0.0
        out.append(normed)
    return ActivationStack(tuple(out))


def weighted_layer_distance(
    x: ActivationStack, x0: ActivationStack, w: LayerWeights
) -> float:
    """Weighted squared stack distance; inputs must already be channel-normalized."""
    if x.shapes() != x0.shapes():
        raise ValueError("activation stacks must share layer shapes")
    if len(w.weights) != x.n_layers:
        raise ValueError(f"{len(w.weights)} weight vectors for {x.n_layers} layers")
    total = 0.0
    for layer, layer0, wl in zip(x.layers, x0.layers, w.weights):
        if wl.shape[0] != layer.shape[2]:
            raise ValueError(
                f"weight length {wl.shape[0]} != channel count {layer.shape[2]}"
            )
        diff = layer.astype(np.float64) - layer0.astype(np.float64)
        h, wdt = layer.shape[0], layer.shape[1]
        total += float(((diff * wl) ** 2).sum() / (h * wdt))
    return total


def single_layer_selector(w: LayerWeights, l: int) -> LayerWeights:
    """Zero every layer's weights except layer l, which becomes all ones."""
    if not 0 <= l < len(w.weights):
        raise IndexError(f"layer index {l} out of range for {len(w.weights)} layers")
    return LayerWeights(
        tuple(
            np.ones_like(wl) if idx == l else np.zeros_like(wl)
            for idx, wl in enumerate(w.weights)
        )
    )


def judge_2afc(t: Triple2AFC, w: LayerWeights) -> Choice:
    """Pick the distorted patch closer to the reference (channel-normalized)."""
    ref = channel_normalize(t.ref)
    d0 = weighted_layer_distance(channel_normalize(t.p0), ref, w)
    d1 = weighted_layer_distance(channel_normalize(t.p1), ref, w)
    if abs(d0 - d1) <= TIE_TOLERANCE:
        return "tie"
    return "p0" if d0 < d1 else "p1"


def _credit(choice: Choice, human_pref: float) -> float:
    if choice == "tie":
        return 0.5
    return human_pref if choice == "p1" else 1.0 - human_pref


def score_2afc(
    items: list[Triple2AFC], w: LayerWeights, distortion_name: str = ""
) -> TwoAFCScore:
    """Mean annotator-agreement credit over the items.

    Per item the credit is the human preference fraction for the chosen
    patch; ties earn 0.5.
    """
    if not items:
        raise ValueError("score_2afc needs at least one item")
    credits = [_credit(judge_2afc(t, w), t.human_pref) for t in items]
    return TwoAFCScore(
        distortion_name=distortion_name,
        score=float(np.mean(credits)),
        n_items=len(items),
    )


def best_single_layer(
    items: list[Triple2AFC], n_layers: int
) -> tuple[int, float, list[float]]:
    """Score each single-layer metric; return (argmax layer, score, all scores).

    Ties resolve to the lowest layer index.
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    if not items:
        raise ValueError("best_single_layer needs at least one item")
    template = LayerWeights.for_stack(items[0].ref)
    if len(template.weights) != n_layers:
        raise ValueError(
            f"items have {len(template.weights)} layers, expected {n_layers}"
        )
    scores = [
        score_2afc(items, single_layer_selector(template, l)).score
        for l in range(n_layers)
    ]
    best = int(np.argmax(scores))  # first occurrence wins ties
    return best, scores[best], scores


# -- metric-combination search over scalar distance tables -------------------
#
# Table-style metrics (pixel losses, learned metrics, stack distances) reduce
# to one (d0, d1) pair per item, so subsets are fused by summing distances,
# optionally z-scoring each metric over all its recorded distances first.


@dataclass(frozen=True)
class DistanceTable:
    """Aligned per-item distances for several metrics plus human preferences."""

    metric_names: tuple[str, ...]  # lexicographic; defines mask bit positions
    item_ids: tuple[str, ...]
    d0: np.ndarray  # (n_metrics, n_items) float64
    d1: np.ndarray  # (n_metrics, n_items) float64
    human_pref: np.ndarray  # (n_items,) float64


@dataclass(frozen=True)
class ComboEntry:
    bits: int
    score: float


@dataclass(frozen=True)
class ComboSearchResult:
    normalized: bool
    metric_names: tuple[str, ...]
    entries: tuple[ComboEntry, ...]
    best: ComboEntry

    def names_of(self, bits: int) -> tuple[str, ...]:
        return tuple(n for i, n in enumerate(self.metric_names) if bits >> i & 1)


def search_metric_combinations(
    table: DistanceTable, normalized: bool = False
) -> ComboSearchResult:
    """Judge every non-empty metric subset by summed distances.

    With ``normalized`` each metric's d0/d1 values are first z-scored using
    the mean and population std of all its recorded distances (d0 and d1
    pooled); near-constant metrics contribute zero. The best subset is
    reported with ties resolved to the lowest mask value.
    """
    m = len(table.metric_names)
    if m < 1:
        raise ValueError("distance table holds no metrics")
    d0 = table.d0.astype(np.float64)
    d1 = table.d1.astype(np.float64)
    if normalized:
        pooled = np.concatenate([d0, d1], axis=1)
        mean = pooled.mean(axis=1, keepdims=True)
        std = pooled.std(axis=1, keepdims=True)
        scale = np.where(std < 1e-9, 0.0, 1.0 / np.where(std < 1e-9, 1.0, std))
        d0 = (d0 - mean) * scale
        d1 = (d1 - mean) * scale
    entries = []
    for bits in range(1, 1 << m):
        members = [i for i in range(m) if bits >> i & 1]
        s0 = d0[members].sum(axis=0)
        s1 = d1[members].sum(axis=0)
        diff = s0 - s1
        credit = np.where(
            np.abs(diff) <= TIE_TOLERANCE,
            0.5,
            np.where(diff > 0, table.human_pref, 1.0 - table.human_pref),
        )
        entries.append(ComboEntry(bits=bits, score=float(credit.mean())))
    best = max(entries, key=lambda e: (e.score, -e.bits))
    return ComboSearchResult(
        normalized=normalized,
        metric_names=table.metric_names,
        entries=tuple(entries),
        best=best,
    )


# -- file formats -------------------------------------------------------------


def write_activation_stack(manifest_path, stack: ActivationStack) -> Path:
    """Activation-stack file: shape manifest + concatenated f32 payload."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    payload = b"".join(to_f32_bytes(layer) for layer in stack.layers)
    payload_file = manifest_path.stem + ".bin"
    checksum = write_payload(manifest_path, payload_file, payload)
    write_manifest(
        manifest_path,
        {
            "layer_shapes": [list(s) for s in stack.shapes()],
            "checksum": checksum,
            "payload_file": payload_file,
        },
    )
    return manifest_path


def read_activation_stack(manifest_path) -> ActivationStack:
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    if "layer_shapes" not in manifest:
        raise FormatError(f"{manifest_path}: missing layer_shapes")
    data = read_payload(manifest_path, manifest)
    layers = []
    offset = 0
    for shape in manifest["layer_shapes"]:
        h, w, c = (int(v) for v in shape)
        nbytes = h * w * c * 4
        if offset + nbytes > len(data):
            raise FormatError(f"{manifest_path}: payload shorter than layer shapes imply")
        layers.append(from_f32_bytes(data[offset : offset + nbytes], (h, w, c)))
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{manifest_path}: payload longer than layer shapes imply")
    return ActivationStack(tuple(layers))


def write_layer_weights(path, w: LayerWeights) -> Path:
    path = Path(path)
    write_manifest(path, {"layers": [wl.tolist() for wl in w.weights]})
    return path


def read_layer_weights(path) -> LayerWeights:
    manifest = read_manifest(Path(path))
    if "layers" not in manifest:
        raise FormatError(f"{path}: missing layers field")
    return LayerWeights(tuple(np.asarray(wl, dtype=np.float64) for wl in manifest["layers"]))


def write_distance_table(path, table: DistanceTable) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["item_id", "metric", "d0", "d1", "human_pref"])
        for mi, metric in enumerate(table.metric_names):
            for ii, item in enumerate(table.item_ids):
                writer.writerow(
                    [
                        item,
                        metric,
                        repr(float(table.d0[mi, ii])),
                        repr(float(table.d1[mi, ii])),
                        repr(float(table.human_pref[ii])),
                    ]
                )
    return path


def read_distance_table(path) -> DistanceTable:
    """Load a distance-table CSV with columns item_id, metric, d0, d1, human_pref.

    Metrics must cover identical item sets; metric order is canonicalized
    lexicographically; items keep their first-seen order.
    """
    path = Path(path)
    per_metric: dict[str, dict[str, tuple[float, float]]] = {}
    prefs: dict[str, float] = {}
    item_order: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"item_id", "metric", "d0", "d1", "human_pref"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise FormatError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            item, metric = row["item_id"], row["metric"]
            d0, d1, pref = float(row["d0"]), float(row["d1"]), float(row["human_pref"])
            if not 0.0 <= pref <= 1.0:
                raise FormatError(f"{path}: human_pref {pref} outside [0, 1]")
            if item in prefs and prefs[item] != pref:
                raise FormatError(f"{path}: inconsistent human_pref for item {item!r}")
            if item not in prefs:
                prefs[item] = pref
                item_order.append(item)
            bucket = per_metric.setdefault(metric, {})
            if item in bucket:
                raise FormatError(f"{path}: duplicate row for ({item!r}, {metric!r})")
            bucket[item] = (d0, d1)
    if not per_metric:
        raise FormatError(f"{path}: table holds no rows")
    metric_names = tuple(sorted(per_metric))
    item_set = set(item_order)
    for metric, bucket in per_metric.items():
        if set(bucket) != item_set:
            raise FormatError(f"{path}: metric {metric!r} does not cover all items")
    d0 = np.array(
        [[per_metric[m][i][0] for i in item_order] for m in metric_names], dtype=np.float64
    )
    d1 = np.array(
        [[per_metric[m][i][1] for i in item_order] for m in metric_names], dtype=np.float64
    )
    human = np.array([prefs[i] for i in item_order], dtype=np.float64)
    return DistanceTable(
        metric_names=metric_names,
        item_ids=tuple(item_order),
        d0=d0,
        d1=d1,
        human_pref=human,
    )
