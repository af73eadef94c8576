"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection: set ``LANEPRED_NUMBA=0`` to force the numpy fallback;
otherwise numba is used when importable. ``BACKEND`` names the active
implementation.
"""
from __future__ import annotations

import os

_flag = os.environ.get("LANEPRED_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

BACKEND = "numpy"
if _want_numba:
    try:
        from ._numba import mixture_log_joint, neighbor_slots  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        _want_numba = False

if not _want_numba:
    from ._numpy import mixture_log_joint, neighbor_slots  # noqa: F401

__all__ = ["mixture_log_joint", "neighbor_slots", "BACKEND"]
