"""Kernel backend selection.

Two interchangeable implementations of the hot array kernels exist:

* ``_ckernels`` — Cython extension, compiled at install time (preferred);
* ``py_kernels`` — numpy fallback, always available.

The active backend is chosen at import time: the ``MCDAL_BACKEND``
environment variable ("cython", "numpy", or "auto") wins, otherwise the
compiled extension is used when it imported cleanly. ``set_backend`` rebinds
the module-level functions, so callers that do ``from mcdal import backend``
and call ``backend.matmul(...)`` always hit the current selection.

The two backends agree within floating-point reassociation error (see
tests/test_backends.py) but are not bit-identical, because numpy's BLAS sums
in a different order than the fixed C loops. Determinism guarantees
elsewhere in the package therefore hold per backend.
"""

import os
from contextlib import contextmanager

from . import py_kernels as _py

try:
    from . import _ckernels as _cy
except ImportError:
    _cy = None

_API = (
    "matmul",
    "matmul_at_b",
    "matmul_a_bt",
    "add_rowvec",
    "relu",
    "relu_backward",
    "softmax_rows",
    "softmax_backward",
    "scaled_add",
    "scaled_add_vec",
    "ce_grad",
)

BACKEND_NAME = None


def available_backends():
    names = ["numpy"]
    if _cy is not None:
        names.insert(0, "cython")
    return tuple(names)


def set_backend(name="auto"):
    """Select the kernel implementation; returns the name actually active."""
    global BACKEND_NAME
    if name == "auto":
        impl = _cy if _cy is not None else _py
    elif name == "cython":
        if _cy is None:
            raise RuntimeError("compiled kernels are not available; rebuild the extension")
        impl = _cy
    elif name == "numpy":
        impl = _py
    else:
        raise ValueError(f"unknown backend {name!r}; expected 'auto', 'cython', or 'numpy'")
    for fn in _API:
        globals()[fn] = getattr(impl, fn)
    BACKEND_NAME = impl.NAME
    return BACKEND_NAME


@contextmanager
def use(name):
    """Temporarily switch backends (tests and benchmarks)."""
    previous = BACKEND_NAME
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


set_backend(os.environ.get("MCDAL_BACKEND", "auto"))
