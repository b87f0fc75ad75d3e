"""Manifest + raw-payload tensor files.

One logical file is a pair on disk: a JSON manifest describing shapes plus a
64-bit payload checksum, and a binary payload of little-endian IEEE-754
32-bit floats in row-major order. The same conventions back feature sets,
cached similarity matrices, and activation stacks.

The checksum is the first 8 bytes of the SHA-256 digest of the payload,
rendered as 16 lowercase hex digits.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Raised for malformed, truncated, or corrupt tensor files."""


def checksum64(data: bytes) -> str:
    """64-bit payload checksum: leading 8 bytes of SHA-256, as hex."""
    return hashlib.sha256(data).hexdigest()[:16]


def to_f32_bytes(arr: np.ndarray) -> bytes:
    """Encode an array as row-major little-endian float32 bytes."""
    a = np.asarray(arr, dtype="<f4")
    if not np.isfinite(a).all():
        raise FormatError("array contains NaN or Inf entries")
    return np.ascontiguousarray(a).tobytes()


def from_f32_bytes(data: bytes, shape: tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * 4
    if len(data) != expected:
        raise FormatError(
            f"payload holds {len(data)} bytes, expected {expected} for shape {shape}"
        )
    return np.frombuffer(data, dtype="<f4").reshape(shape).astype(np.float32)


def write_manifest(path: Path, manifest: dict) -> None:
    # Stable serialization so identical inputs yield identical bytes.
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path: Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise FormatError(f"manifest {path} must hold a JSON object")
    return manifest


def write_payload(manifest_path: Path, payload_name: str, data: bytes) -> str:
    """Write the binary payload next to the manifest; return its checksum."""
    (Path(manifest_path).parent / payload_name).write_bytes(data)
    return checksum64(data)


def read_payload(manifest_path: Path, manifest: dict) -> bytes:
    payload_name = manifest.get("payload_file")
    if not isinstance(payload_name, str):
        raise FormatError(f"{manifest_path}: missing payload_file field")
    payload_path = Path(manifest_path).parent / payload_name
    if not payload_path.is_file():
        raise FormatError(f"payload not found: {payload_path}")
    data = payload_path.read_bytes()
    recorded = manifest.get("checksum")
    actual = checksum64(data)
    if recorded != actual:
        raise FormatError(
            f"{payload_path}: checksum mismatch (manifest {recorded}, payload {actual})"
        )
    return data
