"""Hot-loop kernels with a selectable backend.

The environment variable IRLOSS_BACKEND picks the implementation at
import time:

  numba  - require the jitted kernels (raises if numba is unavailable)
  numpy  - force the pure-numpy fallback
  unset  - numba when importable, numpy otherwise

Both backends implement identical math; see benchmarks/bench_backends.py
for a side-by-side timing comparison.
"""

import importlib
import os

from . import numpy_backend

_choice = os.environ.get("IRLOSS_BACKEND", "").strip().lower() or "auto"
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"IRLOSS_BACKEND must be 'numba' or 'numpy', got {_choice!r}"
    )

numba_backend = None
if _choice in ("auto", "numba"):
    try:
        numba_backend = importlib.import_module(".numba_backend", __name__)
    except Exception:
        if _choice == "numba":
            raise RuntimeError("IRLOSS_BACKEND=numba but the numba kernels failed to import")

NUMBA_AVAILABLE = numba_backend is not None

if NUMBA_AVAILABLE:
    BACKEND = "numba"
    lstm_layer_forward = numba_backend.lstm_layer_forward
    lstm_layer_backward = numba_backend.lstm_layer_backward
else:
    BACKEND = "numpy"
    lstm_layer_forward = numpy_backend.lstm_layer_forward
    lstm_layer_backward = numpy_backend.lstm_layer_backward


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return BACKEND
