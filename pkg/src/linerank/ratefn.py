"""Kernel selection: compiled extension if importable, NumPy otherwise.

``BACKEND`` names the active implementation ("compiled" or "python").
Set the environment variable LINERANK_PURE_KERNEL to a non-empty value
other than 0 to force the NumPy fallback, for example to benchmark one
against the other.
"""

from __future__ import annotations

import os

if os.environ.get("LINERANK_PURE_KERNEL", "0") not in ("", "0"):
    from . import _ratefn_py as _impl
else:
    try:
        from . import _ratefn as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _ratefn_py as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND
max_rate = _impl.max_rate
rate_table = _impl.rate_table
