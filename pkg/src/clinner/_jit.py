"""Optional numba acceleration.

Set ``CLINNER_DISABLE_JIT=1`` to run every kernel as plain numpy code.
Every kernel exposes its numpy path on ``.fallback`` either way, so both
paths are reachable in one process (see ``benchmarks/``).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

JIT_DISABLED = os.environ.get("CLINNER_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes", "on")
JIT_ENABLED = numba is not None and not JIT_DISABLED


def njit(fn=None, *, fallback=None):
    """Compile ``fn`` with numba, or return the numpy fallback when JIT is off.

    The result always carries ``.fallback``: ``fallback`` if given (a
    vectorized numpy equivalent), else the uncompiled ``fn``.
    """
    if fn is None:
        return lambda f: njit(f, fallback=fallback)
    plain = fallback or fn
    if JIT_ENABLED:
        compiled = numba.njit(cache=True, nogil=True)(fn)
        compiled.fallback = plain
        return compiled
    plain.fallback = plain
    plain.py_func = fn
    return plain
