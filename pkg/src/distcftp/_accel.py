"""Optional numba acceleration.

Set ``DISTCFTP_NUMBA=0`` to force the pure-numpy kernels even when numba is
installed. The flag is read once, at import.
"""

import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _flag_enabled() -> bool:
    return os.environ.get("DISTCFTP_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _flag_enabled()


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover
    njit = _noop_jit


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
