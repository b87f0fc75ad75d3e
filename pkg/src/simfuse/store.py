"""Feature-set files and paired left/right galleries.

A feature set is one representation's embedding rows for one gallery side.
On disk it is a tensorfile pair; the manifest carries
``{repr_name, n_items, dim, item_ids, checksum, payload_file}``. A gallery
manifest lists, per representation, the left and right feature files:
``{n_pairs, representations: [{name, left_file, right_file}]}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

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

# Rows are accepted as unit-norm when within this distance of 1.
NORM_TOLERANCE = 1e-4
# Below this the direction is meaningless and cosine similarity undefined.
ZERO_NORM_THRESHOLD = 1e-8


class ValidationError(ValueError):
    """Raised when feature data violates the unit-norm/consistency contract."""


@dataclass(frozen=True)
class FeatureSet:
    """Embedding rows of one representation; rows are meant to be unit-norm."""

    repr_name: str
    rows: np.ndarray  # (n_items, dim) float32
    item_ids: tuple[str, ...]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float32)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValidationError(
                f"{self.repr_name}: rows must be a non-empty 2-D matrix, got shape {rows.shape}"
            )
        if len(self.item_ids) != rows.shape[0]:
            raise ValidationError(
                f"{self.repr_name}: {len(self.item_ids)} item_ids for {rows.shape[0]} rows"
            )
        if len(set(self.item_ids)) != len(self.item_ids):
            raise ValidationError(f"{self.repr_name}: item_ids are not unique")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "item_ids", tuple(self.item_ids))

    @property
    def n_items(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a unit-norm check, optionally with renormalized rows."""

    repr_name: str
    n_items: int
    violating_rows: tuple[int, ...]
    norms: tuple[float, ...]  # norms of the violating rows, same order
    corrected: FeatureSet | None = None

    @property
    def ok(self) -> bool:
        return not self.violating_rows


@dataclass(frozen=True)
class PairedGallery:
    """All feature sets of an (L_i, R_i) pair gallery, both sides aligned."""

    n_pairs: int
    representations: tuple[str, ...]
    left: tuple[FeatureSet, ...]
    right: tuple[FeatureSet, ...]

    @property
    def n_representations(self) -> int:
        return len(self.representations)


def write_feature_set(
    rows: np.ndarray,
    repr_name: str,
    item_ids,
    manifest_path,
    payload_file: str | None = None,
) -> tuple[Path, Path]:
    """Write rows as a manifest/payload pair; returns both paths.

    The payload round-trips bit-exactly: raw little-endian float32,
    row-major. NaN or Inf entries are rejected.
    """
    manifest_path = Path(manifest_path)
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
        raise ValidationError(f"rows must be a non-empty 2-D matrix, got shape {rows.shape}")
    if not np.isfinite(rows).all():
        raise ValidationError(f"{repr_name}: rows contain NaN or Inf entries")
    item_ids = [str(i) for i in item_ids]
    if len(item_ids) != rows.shape[0]:
        raise ValidationError(f"{len(item_ids)} item_ids for {rows.shape[0]} rows")

    if payload_file is None:
        payload_file = manifest_path.stem + ".bin"
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    checksum = write_payload(manifest_path, payload_file, to_f32_bytes(rows))
    write_manifest(
        manifest_path,
        {
            "repr_name": repr_name,
            "n_items": int(rows.shape[0]),
            "dim": int(rows.shape[1]),
            "item_ids": item_ids,
            "checksum": checksum,
            "payload_file": payload_file,
        },
    )
    return manifest_path, manifest_path.parent / payload_file


def read_feature_set(manifest_path) -> FeatureSet:
    """Read a manifest/payload pair, verifying checksum and dimensions."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    for key in ("repr_name", "n_items", "dim", "item_ids", "checksum", "payload_file"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: missing field {key!r}")
    n_items = int(manifest["n_items"])
    dim = int(manifest["dim"])
    item_ids = manifest["item_ids"]
    if len(item_ids) != n_items:
        raise FormatError(
            f"{manifest_path}: {len(item_ids)} item_ids but n_items={n_items}"
        )
    data = read_payload(manifest_path, manifest)
    rows = from_f32_bytes(data, (n_items, dim))
    return FeatureSet(repr_name=manifest["repr_name"], rows=rows, item_ids=tuple(item_ids))


def validate_feature_set(fs: FeatureSet, renormalize: bool = False) -> ValidationReport:
    """Check the unit-norm invariant; optionally renormalize violating rows.

    Rows with norm below ``ZERO_NORM_THRESHOLD`` are always an error. Rows
    already within ``NORM_TOLERANCE`` of unit norm are left untouched, which
    makes renormalization idempotent.
    """
    norms = np.linalg.norm(fs.rows.astype(np.float64), axis=1)
    zero = np.flatnonzero(norms < ZERO_NORM_THRESHOLD)
    if zero.size:
        raise ValidationError(
            f"{fs.repr_name}: zero-norm rows at indices {zero.tolist()} "
            "(cosine similarity undefined)"
        )
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
    corrected = None
    if renormalize and bad.size:
        rows = fs.rows.copy()
        rows[bad] = (rows[bad].astype(np.float64) / norms[bad, None]).astype(np.float32)
        corrected = FeatureSet(fs.repr_name, rows, fs.item_ids)
    elif renormalize:
        corrected = fs
    return ValidationReport(
        repr_name=fs.repr_name,
        n_items=fs.n_items,
        violating_rows=tuple(int(i) for i in bad),
        norms=tuple(float(norms[i]) for i in bad),
        corrected=corrected,
    )


def load_gallery(manifest_path) -> PairedGallery:
    """Load a paired gallery, cross-checking sizes across all feature files.

    Representations are canonicalized to lexicographic order by name, which
    fixes subset-mask bit positions across runs.
    """
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    if "n_pairs" not in manifest or "representations" not in manifest:
        raise FormatError(f"{manifest_path}: gallery manifest needs n_pairs and representations")
    n_pairs = int(manifest["n_pairs"])
    entries = manifest["representations"]
    if not entries:
        raise FormatError(f"{manifest_path}: gallery lists no representations")
    names = [e["name"] for e in entries]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ValidationError(f"duplicate repr_name in gallery manifest: {dupes}")

    base = manifest_path.parent
    left, right = [], []
    for entry in sorted(entries, key=lambda e: e["name"]):
        l_fs = read_feature_set(base / entry["left_file"])
        r_fs = read_feature_set(base / entry["right_file"])
        for side, fs in (("left", l_fs), ("right", r_fs)):
            if fs.n_items != n_pairs:
                raise ValidationError(
                    f"{entry['name']} {side}: n_items={fs.n_items} but gallery n_pairs={n_pairs}"
                )
        if l_fs.dim != r_fs.dim:
            raise ValidationError(
                f"{entry['name']}: left dim {l_fs.dim} != right dim {r_fs.dim}"
            )
        left.append(l_fs)
        right.append(r_fs)
    return PairedGallery(
        n_pairs=n_pairs,
        representations=tuple(sorted(names)),
        left=tuple(left),
        right=tuple(right),
    )


def write_gallery_manifest(manifest_path, n_pairs: int, representations) -> Path:
    """Write a gallery manifest. ``representations`` is an iterable of
    (name, left_file, right_file) with paths relative to the manifest."""
    manifest_path = Path(manifest_path)
    entries = [
        {"name": name, "left_file": str(lf), "right_file": str(rf)}
        for name, lf, rf in representations
    ]
    write_manifest(manifest_path, {"n_pairs": int(n_pairs), "representations": entries})
    return manifest_path
