"""Kernel backend selection.

The compiled extension is used when importable; otherwise the numpy versions
are.  Set ``FASTTRACKER_BACKEND=python`` to force the fallback, or call
:func:`set_backend` at runtime (the benchmark does this to compare both).
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

iou_matrix = None
coverage_matrix = None
linear_assignment = None
kalman_predict = None
kalman_update = None
BACKEND = None


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    global iou_matrix, coverage_matrix, linear_assignment, kalman_predict, kalman_update, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {available_backends()}")
    mod = _BACKENDS[name]
    iou_matrix = mod.iou_matrix
    coverage_matrix = mod.coverage_matrix
    linear_assignment = mod.linear_assignment
    kalman_predict = mod.kalman_predict
    kalman_update = mod.kalman_update
    BACKEND = name


set_backend(os.environ.get("FASTTRACKER_BACKEND") or ("compiled" if _compiled is not None else "python"))
