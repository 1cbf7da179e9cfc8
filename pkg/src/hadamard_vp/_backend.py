"""Selects the evaluation-kernel backend at import time.

The compiled extension is preferred; the NumPy implementation is the
fallback.  Set ``HADAMARD_VP_PURE_PYTHON=1`` to force the fallback (used
by the backend-parity tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("HADAMARD_VP_PURE_PYTHON") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

#: Name of the active backend: "compiled" or "python".
BACKEND = kernels.name
