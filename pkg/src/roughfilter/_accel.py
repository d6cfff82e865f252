"""Optional numba acceleration for the hot inner loops.

The environment variable ROUGHFILTER_NO_NUMBA=1 forces the pure-numpy
fallback path; otherwise numba is used when importable.  Every kernel
decorated with ``maybe_njit`` must be valid plain Python so the fallback
is the same code, interpreted.  ``benchmarks/bench_kernels.py`` compares
the two paths.
"""

import os

NUMBA_DISABLED = os.environ.get("ROUGHFILTER_NO_NUMBA", "").strip() in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None
        HAVE_NUMBA = False
else:
    numba = None
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def maybe_njit(*args, **kwargs):
    """numba.njit when enabled, identity decorator otherwise."""
    if USING_NUMBA:
        return numba.njit(*args, cache=True, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def deco(fn):
        return fn

    return deco


def set_threads(n):
    """Cap numba's thread pool; no-op on the fallback path."""
    if USING_NUMBA and n is not None and n > 0:
        try:
            numba.set_num_threads(n)
        except ValueError:
            pass
