"""Backend selection for the hot per-point loops.

The compiled extension is used when it imports; otherwise the NumPy
fallback is used. Set ``HALLSPEC_KERNELS=python`` to force the fallback.
The wrappers below accept arbitrary-shaped arrays and normalize layout
before dispatching.
"""
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("HALLSPEC_KERNELS", "").lower() == "python":
        raise ImportError("fallback forced")
    from ._ext import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on build
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def _impl(name, backend=None):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return getattr(_compiled, name)
    return getattr(_kernels_py, name)


def leray_project(c, kx, ky, kz, backend=None):
    """Per-mode ``(I - k k^T/|k|^2) c`` for a (3, n0, n1, n2) coefficient array."""
    c = np.ascontiguousarray(c, dtype=np.complex128)
    args = [np.ascontiguousarray(k, dtype=np.float64).ravel() for k in (kx, ky, kz)]
    return _impl("leray_project", backend)(c, *args)


def cross(a, b, backend=None):
    """Pointwise cross product of two (3, ...) arrays."""
    shape = a.shape
    if a.dtype != np.float64 or b.dtype != np.float64:
        return _kernels_py.cross(a, b)
    a2 = np.ascontiguousarray(a).reshape(3, -1)
    b2 = np.ascontiguousarray(b).reshape(3, -1)
    return _impl("cross", backend)(a2, b2).reshape(shape)


def _as_components(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        v = np.concatenate([v.real, v.imag]) if v.ndim > 3 else np.stack([v.real, v.imag])
    elif v.ndim == 3:
        v = v[None]
    return np.ascontiguousarray(v, dtype=np.float64).reshape(v.shape[0], -1)


def norm_pow_sum(v, p, backend=None):
    """Sum over points of ``|v(x)|**p`` with ``|.|`` the Euclidean norm over components.

    ``v`` is a scalar (n0, n1, n2) array or a (c, n0, n1, n2) stack; complex
    values contribute real and imaginary parts as separate components.
    """
    return _impl("norm_pow_sum", backend)(_as_components(v), float(p))


def norm_max(v, backend=None):
    return _impl("norm_max", backend)(_as_components(v))


def lr_accumulate(acc, v, weight, r, backend=None):
    """In place: ``acc += (weight*|v|)**r`` (or running max for r = inf)."""
    _impl("lr_accumulate", backend)(acc, _as_components(v), float(weight), float(r))
