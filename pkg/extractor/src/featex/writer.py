"""Feature-set file writer matching the fusion engine's on-disk schema.

The engine ingests a JSON manifest `{repr_name, n_items, dim, item_ids,
checksum, payload_file}` next to a binary payload of row-major little-endian
float32 values, where the checksum is the leading 8 bytes of the payload's
SHA-256 in hex. This module re-implements that contract from its
documentation; the extractor talks to the engine only through these files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def checksum64(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def write_feature_file(
    manifest_path,
    repr_name: str,
    rows: np.ndarray,
    item_ids,
    provenance: dict | None = None,
) -> Path:
    """Write rows + manifest; extra provenance keys are ignored by readers."""
    manifest_path = Path(manifest_path)
    rows = np.ascontiguousarray(np.asarray(rows, dtype="<f4"))
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError(f"rows must be a non-empty 2-D matrix, got {rows.shape}")
    if not np.isfinite(rows).all():
        raise ValueError("rows contain NaN or Inf")
    item_ids = [str(i) for i in item_ids]
    if len(item_ids) != rows.shape[0]:
        raise ValueError(f"{len(item_ids)} item_ids for {rows.shape[0]} rows")

    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    payload_file = manifest_path.stem + ".bin"
    payload = rows.tobytes()
    (manifest_path.parent / payload_file).write_bytes(payload)
    manifest = {
        "repr_name": repr_name,
        "n_items": int(rows.shape[0]),
        "dim": int(rows.shape[1]),
        "item_ids": item_ids,
        "checksum": checksum64(payload),
        "payload_file": payload_file,
    }
    if provenance:
        manifest["provenance"] = provenance
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
