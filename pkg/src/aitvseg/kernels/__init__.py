"""Hot per-pixel kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``AITVSEG_DISABLE_NUMBA`` is unset or ``0``. Both paths are
importable directly as ``kernels.numpy_backend`` and ``kernels.numba_backend``
(the latter is ``None`` when numba is missing).
"""

import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

NUMBA_AVAILABLE = numba_backend is not None


def _numba_requested():
    return os.environ.get("AITVSEG_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


USE_NUMBA = NUMBA_AVAILABLE and _numba_requested()
backend = numba_backend if USE_NUMBA else numpy_backend
BACKEND_NAME = "numba" if USE_NUMBA else "numpy"

prox_aitv_field = backend.prox_aitv_field
prox_iso_field = backend.prox_iso_field
poisson_counts = backend.poisson_counts
nearest_centroid = backend.nearest_centroid

__all__ = [
    "prox_aitv_field",
    "prox_iso_field",
    "poisson_counts",
    "nearest_centroid",
    "numpy_backend",
    "numba_backend",
    "NUMBA_AVAILABLE",
    "USE_NUMBA",
    "BACKEND_NAME",
]
