"""Kernel backend selection.

At import time the compiled extension is preferred and the pure-numpy
fallback is used when it is absent. Set MORPHFIT_BACKEND=python (or
=cython) in the environment to force one; `set_backend` switches at
runtime, which the parity tests and the backend benchmark rely on.

Hot-path callers look the implementation up through this module
(`_backend.impl.fn(...)`) so a switch takes effect immediately.
"""

import os

from . import _kernels_py

_requested = os.environ.get("MORPHFIT_BACKEND", "auto").strip().lower() or "auto"


def _load_compiled():
    from . import _kernels

    return _kernels


if _requested in ("python", "py"):
    impl = _kernels_py
elif _requested in ("cython", "compiled", "c"):
    impl = _load_compiled()
else:
    if _requested != "auto":
        raise ImportError(f"unknown MORPHFIT_BACKEND value: {_requested!r}")
    try:
        impl = _load_compiled()
    except ImportError:
        impl = _kernels_py


def get_backend():
    """Name of the active kernel implementation: 'cython' or 'python'."""
    return "python" if impl is _kernels_py else "cython"


def set_backend(name):
    """Switch the active implementation; returns the resulting backend name.

    Accepts 'python', 'cython', or 'auto'. Requesting 'cython' raises
    ImportError when the extension is not built.
    """
    global impl
    name = name.strip().lower()
    if name in ("python", "py"):
        impl = _kernels_py
    elif name in ("cython", "compiled", "c"):
        impl = _load_compiled()
    elif name == "auto":
        try:
            impl = _load_compiled()
        except ImportError:
            impl = _kernels_py
    else:
        raise ValueError(f"unknown backend: {name!r}")
    return get_backend()
