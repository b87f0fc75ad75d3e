"""Kernel backend selection: compiled extension if available, NumPy otherwise.

Set ``SIMFUSE_KERNELS=numpy`` to force the fallback or
``SIMFUSE_KERNELS=cython`` to require the extension (raising if missing).
Both backends produce bit-identical results.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("SIMFUSE_KERNELS", "").lower()

if _forced == "numpy":
    _impl = _kernels_py
    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise ImportError(
                "SIMFUSE_KERNELS=cython but the compiled extension is not built; "
                "run `python setup.py build_ext --inplace`"
            )
        _impl = _kernels_py
        BACKEND = "numpy"

accumulate = _impl.accumulate
accumulate_norm = _impl.accumulate_norm
count_hits = _impl.count_hits


def get_backends() -> dict[str, object]:
    """All importable backends by name (for tests and the benchmark)."""
    backends: dict[str, object] = {"numpy": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends
