"""Backend selection for the hot numeric kernels.

The env var GQ_BACKEND picks the implementation at import time:

* ``numba`` -- require the JIT backend, raise if numba is missing.
* ``numpy`` -- force the pure-numpy fallback.
* unset / ``auto`` -- numba when importable, numpy otherwise.

Both backends produce identical integer results (hard assignment, packing);
softmax paths agree to float round-off.  ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

from . import numpy_backend

_requested = os.environ.get("GQ_BACKEND", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"GQ_BACKEND={_requested!r} not understood (use 'numba', 'numpy' or 'auto')"
    )

if _requested == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_backend
        BACKEND = "numpy"

soft_assign = _impl.soft_assign
soft_quantize = _impl.soft_quantize
hard_quantize = _impl.hard_quantize
pack_bits = _impl.pack_bits
unpack_bits = _impl.unpack_bits
