"""Backend selection for the geometry kernels.

The compiled Cython extension is used when it has been built; otherwise the
numpy implementation takes over. Set ``RIVERTRAJ_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _pykernels

if os.environ.get("RIVERTRAJ_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

cog_diff = _impl.cog_diff
bearings = _impl.bearings
steps_batch = _impl.steps_batch
reconstruct_batch = _impl.reconstruct_batch
project_to_polyline = _impl.project_to_polyline

__all__ = [
    "BACKEND",
    "cog_diff",
    "bearings",
    "steps_batch",
    "reconstruct_batch",
    "project_to_polyline",
]
