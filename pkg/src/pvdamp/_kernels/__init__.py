"""Backend selection for the filter-bank kernels.

The compiled extension is preferred when importable; the NumPy fallback
computes the same quantities. Set ``PVDAMP_BACKEND=numpy`` (or ``compiled``)
to force a choice, or call :func:`set_backend` at runtime (used by the
benchmark and the equivalence tests).
"""

import os

import numpy as np

from . import _reference

try:
    from . import _filterbank as _compiled
except ImportError:  # extension not built; pure NumPy still works
    _compiled = None

_BACKENDS = {"numpy": _reference}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_requested = os.environ.get("PVDAMP_BACKEND", "auto")
if _requested == "auto":
    _active_name = "compiled" if _compiled is not None else "numpy"
elif _requested in _BACKENDS:
    _active_name = _requested
else:
    raise ImportError(
        f"PVDAMP_BACKEND={_requested!r} unavailable; choices: {sorted(_BACKENDS)}"
    )


def available_backends():
    return sorted(_BACKENDS)


def get_backend():
    return _active_name


def set_backend(name):
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_BACKENDS)}")
    _active_name = name


def analysis_periodic(x, lo, hi):
    x = np.ascontiguousarray(x, dtype=np.complex128)
    return _BACKENDS[_active_name].analysis_periodic(x, lo, hi)


def synthesis_periodic(a, d, lo, hi):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    d = np.ascontiguousarray(d, dtype=np.complex128)
    return _BACKENDS[_active_name].synthesis_periodic(a, d, lo, hi)
