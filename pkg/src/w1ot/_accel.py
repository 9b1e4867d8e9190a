"""Backend switch for the compiled kernels.

Numba is used when it imports cleanly and ``W1OT_DISABLE_NUMBA`` is unset
(or set to ``0``/``false``/``no``).  Otherwise every kernel runs on its
vectorised NumPy fallback.  The choice is made once, at import time.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}


def _numba_requested() -> bool:
    return os.environ.get("W1OT_DISABLE_NUMBA", "").strip().lower() in _FALSEY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _numba_requested()


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged.

    Compilation is independent of ``USE_NUMBA`` so that benchmarks can
    always compare both paths; dispatch is done by the callers.
    """
    if not NUMBA_AVAILABLE:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
