"""Kernel backend selection.

The GRU recurrence dominates training time, so it has a compiled
implementation (``_gru_cy``, built from Cython) and a pure-numpy
fallback with identical semantics.  The compiled module is preferred
when importable; set ``BCD4REC_BACKEND=numpy`` or ``=cython`` to force
one explicitly (forcing cython raises if the extension is missing).

``benchmarks/bench_backends.py`` compares the two.
"""

import os

_requested = os.environ.get("BCD4REC_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "numpy"):
    raise RuntimeError(f"unknown BCD4REC_BACKEND value: {_requested!r}")

if _requested in ("auto", "cython"):
    try:
        from . import _gru_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import numpy_ref as _impl
        BACKEND = "numpy"
else:
    from . import numpy_ref as _impl
    BACKEND = "numpy"

gru_layer_forward = _impl.gru_layer_forward
gru_layer_backward = _impl.gru_layer_backward

__all__ = ["BACKEND", "gru_layer_forward", "gru_layer_backward"]
