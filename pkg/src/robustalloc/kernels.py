"""Backend selection for the hot kernels.

The compiled extension is used when importable. Setting the environment
variable ``ROBUSTALLOC_BACKEND=python`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("ROBUSTALLOC_BACKEND", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

OPTIMAL = _kernels_py.OPTIMAL
UNBOUNDED = _kernels_py.UNBOUNDED
ITERATION_LIMIT = _kernels_py.ITERATION_LIMIT
BLAND = _kernels_py.BLAND
HYBRID = _kernels_py.HYBRID

tabulate_fam = _impl.tabulate_fam
line_extrema = _impl.line_extrema
simplex = _impl.simplex


def backends():
    """Mapping of available backend names to kernel modules."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
