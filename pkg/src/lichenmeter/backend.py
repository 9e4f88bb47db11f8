"""Kernel backend selection: numba JIT by default, pure numpy on request.

Every hot kernel in this package ships two implementations: a numba
``@njit`` version and a vectorized numpy/scipy one. Set ``LICHENMETER_NUMBA=0``
to force the numpy lane (it is also used automatically when numba cannot be
imported). ``benchmarks/bench_kernels.py`` times both lanes side by side.
"""

import logging
import os

logger = logging.getLogger(__name__)

_flag = os.environ.get("LICHENMETER_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")

try:
    import numba

    # workqueue is always bundled; avoids TBB-version warnings at import
    numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    numba = None
    HAVE_NUMBA = False
    if NUMBA_REQUESTED:
        logger.warning("numba not importable; falling back to pure-numpy kernels")

USE_NUMBA = NUMBA_REQUESTED and HAVE_NUMBA


def jit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged.

    Compilation is cached on disk, so repeated runs skip the compile cost.
    """
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def jit_parallel(fn):
    """Like :func:`jit` but with thread-parallel loops (use with prange over
    independent output rows only; no cross-iteration reductions)."""
    if HAVE_NUMBA:
        return numba.njit(cache=True, parallel=True)(fn)
    return fn


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range
