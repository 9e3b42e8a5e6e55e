"""numba shim.

Set ``CAUDA_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
fallback instead of the jitted loop version.
"""
import functools
import os

DISABLE_NUMBA = os.environ.get("CAUDA_DISABLE_NUMBA", "0") not in ("", "0", "false", "False")

try:
    if DISABLE_NUMBA:
        raise ImportError
    import numba as nb
except ImportError:  # pragma: no cover - exercised only without numba
    nb = None


def _noop(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


if nb is not None:
    njit = functools.partial(nb.njit, cache=True, nogil=True)
    HAVE_NUMBA = True
else:
    njit = _noop
    HAVE_NUMBA = False
