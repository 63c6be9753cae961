"""Hot loops, with a compiled and a pure-numpy implementation.

The backend is chosen once at import from ``PTFPRG_BACKEND`` (``numba`` or
``numpy``; default ``numba`` when importable).  ``PTFPRG_THREADS`` caps the
numba thread pool (0 or unset = numba's default).
"""

import os

from . import _numpy

BACKEND = os.environ.get("PTFPRG_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"PTFPRG_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    # the bundled TBB is too old for numba and only produces a warning
    os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
    try:
        from . import _numba as _impl
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"
        _impl = _numpy
    else:
        _threads = int(os.environ.get("PTFPRG_THREADS", "0") or 0)
        if _threads > 0:
            import numba

            numba.set_num_threads(min(_threads, numba.config.NUMBA_NUM_THREADS))
else:
    _impl = _numpy

gf_mul_array = _impl.gf_mul_array
nisan_expand_batch = _impl.nisan_expand_batch
grid_gaussian_batch = _impl.grid_gaussian_batch
family_batch = _impl.family_batch
composed_batch = _impl.composed_batch
robp_run_batch = _impl.robp_run_batch
jacobi_eigh = _impl.jacobi_eigh
hermite_moments = _impl.hermite_moments

__all__ = [
    "BACKEND",
    "gf_mul_array",
    "nisan_expand_batch",
    "grid_gaussian_batch",
    "family_batch",
    "composed_batch",
    "robp_run_batch",
    "jacobi_eigh",
    "hermite_moments",
]
