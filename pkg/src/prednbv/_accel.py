"""Numba JIT selection. Set PREDNBV_NO_NUMBA=1 to force the pure-numpy path."""

import os


def _want_numba() -> bool:
    flag = os.environ.get("PREDNBV_NO_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _want_numba()

if NUMBA_ENABLED:
    from numba import njit
else:
    # no-op decorator: kernels run as plain interpreted numpy/python
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap
