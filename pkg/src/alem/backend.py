"""Kernel backend selection.

The hot numeric kernels (chunked distance updates, 1-D convolutions) exist in
two interchangeable implementations: numba-jitted loops and pure numpy. The
active one is chosen by the ``ALEM_BACKEND`` environment variable:

    ALEM_BACKEND=auto    numba if importable, else numpy (default)
    ALEM_BACKEND=numba   require numba, error if unavailable
    ALEM_BACKEND=numpy   force the pure-numpy path

Within one backend every kernel is deterministic: results do not depend on
chunk sizes or thread count. Across backends results agree to float rounding
(summation orders differ), so a reproducibility claim is always per-backend.
"""

import os

ENV_VAR = "ALEM_BACKEND"

_CHOICES = ("auto", "numba", "numpy")

try:
    import numba  # noqa: F401

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


class BackendError(RuntimeError):
    pass


def available_backends():
    """Backends usable in this process, preferred first."""
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


def resolve_backend(name=None):
    """Map an explicit request or the environment to a concrete backend name."""
    if name is None:
        name = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if name not in _CHOICES:
        raise BackendError(
            f"unknown backend {name!r}; expected one of {', '.join(_CHOICES)}"
        )
    if name == "auto":
        return "numba" if _HAVE_NUMBA else "numpy"
    if name == "numba" and not _HAVE_NUMBA:
        raise BackendError("backend 'numba' requested but numba is not importable")
    return name


def active_backend():
    """The backend the current environment resolves to."""
    return resolve_backend(None)
