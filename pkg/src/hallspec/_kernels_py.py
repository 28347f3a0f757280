"""Pure NumPy fallback for the compiled kernels in ``hallspec._ext``."""
import numpy as np


def leray_project(c, kx, ky, kz):
    kx = kx[:, None, None]
    ky = ky[None, :, None]
    kz = kz[None, None, :]
    ksq = kx * kx + ky * ky + kz * kz
    safe = np.where(ksq == 0.0, 1.0, ksq)
    dot = (kx * c[0] + ky * c[1] + kz * c[2]) / safe
    out = np.empty_like(c)
    out[0] = c[0] - kx * dot
    out[1] = c[1] - ky * dot
    out[2] = c[2] - kz * dot
    out[:, ksq == 0.0] = 0.0
    return out


def cross(a, b):
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def norm_pow_sum(v, p):
    s = np.einsum("ci,ci->i", v, v)
    if p == 2.0:
        return float(s.sum())
    return float(np.sum(s ** (0.5 * p)))


def norm_max(v):
    return float(np.sqrt(np.max(np.einsum("ci,ci->i", v, v))))


def lr_accumulate(acc, v, weight, r):
    t = weight * np.sqrt(np.einsum("ci,ci->i", v, v))
    if np.isinf(r):
        np.maximum(acc, t, out=acc)
    else:
        acc += t ** r
