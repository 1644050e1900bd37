"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and ``ANML_PURE_PYTHON`` is
unset. ``BACKEND`` names the active implementation.

``knn_row_sums`` always dispatches to the numpy version: ``np.partition`` is
SIMD-accelerated on current numpy and beat the compiled quickselect by about
2x (see benchmarks/bench_kernels.py). The compiled one stays for comparison.
"""

import os

from . import _fallback as fallback

compiled = None
if not os.environ.get("ANML_PURE_PYTHON"):
    try:
        from . import _core as compiled
    except ImportError:  # extension not built
        compiled = None

_active = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "numpy"

adam_update = _active.adam_update
knn_row_sums = fallback.knn_row_sums

__all__ = ["BACKEND", "adam_update", "knn_row_sums", "compiled", "fallback"]
