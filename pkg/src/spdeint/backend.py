"""Computational backend selection.

The time-stepping kernels exist twice: a numba-compiled fast path and a
pure-numpy fallback.  Which one runs is decided by the ``SPDEINT_BACKEND``
environment variable:

* ``auto`` (default) -- numba if it imports, numpy otherwise,
* ``numba``          -- force numba, fail loudly if unavailable,
* ``numpy``          -- force the pure-numpy path.

Callers may also override per call via the ``backend=`` argument of
:func:`spdeint.schemes.run_scheme`.
"""

import os

ENV_VAR = "SPDEINT_BACKEND"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def resolve_backend(override=None):
    """Return "numba" or "numpy" given an optional per-call override."""
    choice = override if override is not None else os.environ.get(ENV_VAR, "auto")
    choice = choice.lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}; expected auto, numba or numpy")
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("backend 'numba' requested but numba is not importable")
        return "numba"
    return "numba" if HAVE_NUMBA else "numpy"
