"""Fourier multipliers, vector calculus, projections and dealiased products.

Every function is pure: inputs are never modified and fresh fields are
returned. Odd-order derivative symbols vanish at the Nyquist frequency so
that real fields stay real.
"""

import numpy as np

from . import kernels
from .errors import ConfigurationError, DomainError
from .fields import (SpectralField, SpectralTensorField, SpectralVectorField,
                     hermitian_partner)
from .grid import fftn, ifftn


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------
def transform_to_physical(field):
    """Physical samples of a scalar/vector/tensor field."""
    return field.to_physical()


def transform_to_spectral(samples, grid, real=None, keep_mean=False):
    """Forward transform; picks the field type from the sample array rank."""
    samples = np.asarray(samples)
    extra = samples.ndim - 3
    cls = {0: SpectralField, 1: SpectralVectorField, 2: SpectralTensorField}.get(extra)
    if cls is None or samples.shape[extra:] != grid.shape:
        raise ConfigurationError(
            f"sample shape {samples.shape} does not match grid resolution {grid.N}")
    return cls.from_physical(grid, samples, real=real, keep_mean=keep_mean)


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------
def _multiplier_array(grid, m):
    if callable(m):
        with np.errstate(all="ignore"):
            vals = m(*grid.xi_axes())
        vals = np.broadcast_to(np.asarray(vals, dtype=np.complex128), grid.shape)
    else:
        vals = np.broadcast_to(np.asarray(m, dtype=np.complex128), grid.shape)
    return vals


def apply_multiplier(field, m):
    """Multiply every coefficient by ``m(xi)``; the zero mode stays 0.

    ``m`` is a callable ``m(xi1, xi2, xi3)`` on broadcastable frequency axes
    or an array on the lattice. The reality flag survives only when ``m`` is
    itself Hermitian, ``m(-xi) = conj(m(xi))``.
    """
    grid = field.grid
    vals = _multiplier_array(grid, m)
    bad = ~np.isfinite(vals)
    bad[0, 0, 0] = False
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        k = grid.k1d[idx]
        ks = tuple(int(v) for v in k)
        raise DomainError(
            f"multiplier is not finite at frequency xi = {tuple(k / grid.L)} (k = {ks})")
    vals = np.array(vals)
    vals[0, 0, 0] = 0.0
    real = field.real and np.allclose(hermitian_partner(vals), np.conj(vals),
                                      rtol=1e-14, atol=1e-14 * (np.max(np.abs(vals)) or 1))
    return field._like(field.coeffs * vals, real=real, keep_mean=False)


def _odd_symbol(grid, axis):
    return 1j * grid.xi_axes(odd=True)[axis]


def derivative(field, axis):
    """Partial derivative along ``axis`` (0, 1 or 2): symbol ``i xi_axis``."""
    if axis not in (0, 1, 2):
        raise ConfigurationError(f"axis must be 0, 1 or 2, got {axis!r}")
    return field._like(field.coeffs * _odd_symbol(field.grid, axis), keep_mean=False)


def laplacian(field):
    return field._like(-field.grid.xi_sq * field.coeffs, keep_mean=False)


def inverse_laplacian(field):
    """Symbol ``-1/|xi|^2``; a nonzero input mean is dropped and recorded in meta."""
    meta = {}
    if field.has_mean:
        meta["mean_removed"] = field.coeffs[(...,) + (0, 0, 0)].tolist()
    return field._like(-field.grid.inv_xi_sq * field.coeffs, meta=meta, keep_mean=False)


def inverse_neg_laplacian(field, scale=1.0):
    """``(-scale * Laplacian)^{-1}``: symbol ``1/(scale |xi|^2)``."""
    meta = {}
    if field.has_mean:
        meta["mean_removed"] = field.coeffs[(...,) + (0, 0, 0)].tolist()
    return field._like(field.grid.inv_xi_sq * field.coeffs / scale, meta=meta,
                       keep_mean=False)


# ---------------------------------------------------------------------------
# vector calculus on raw coefficient arrays (used by the solver hot paths)
# ---------------------------------------------------------------------------
def div_coeffs(grid, c):
    x1, x2, x3 = grid.xi_axes(odd=True)
    return 1j * (x1 * c[0] + x2 * c[1] + x3 * c[2])


def grad_coeffs(grid, c):
    x1, x2, x3 = grid.xi_axes(odd=True)
    return np.stack([1j * x1 * c, 1j * x2 * c, 1j * x3 * c])


def curl_coeffs(grid, c):
    x1, x2, x3 = grid.xi_axes(odd=True)
    return 1j * np.stack([
        x2 * c[2] - x3 * c[1],
        x3 * c[0] - x1 * c[2],
        x1 * c[1] - x2 * c[0],
    ])


def tensor_div_coeffs(grid, t):
    """Row divergence ``(div T)^j = sum_k d_k T^{jk}`` of a (3, 3, ...) array."""
    x1, x2, x3 = grid.xi_axes(odd=True)
    return 1j * (x1 * t[:, 0] + x2 * t[:, 1] + x3 * t[:, 2])


def leray_coeffs(grid, c):
    x1, x2, x3 = grid.xi_axes()
    return kernels.leray_project(c, x1.ravel(), x2.ravel(), x3.ravel())


def biot_savart_coeffs(grid, c):
    return curl_coeffs(grid, c) * grid.inv_xi_sq


# ---------------------------------------------------------------------------
# vector calculus on fields
# ---------------------------------------------------------------------------
def _require_vector(v):
    if not isinstance(v, SpectralVectorField):
        raise ConfigurationError("expected a SpectralVectorField")


def divergence(v):
    _require_vector(v)
    return SpectralField(v.grid, div_coeffs(v.grid, v.coeffs), real=v.real)


def gradient(s):
    if not isinstance(s, SpectralField):
        raise ConfigurationError("expected a SpectralField")
    return SpectralVectorField(s.grid, grad_coeffs(s.grid, s.coeffs), real=s.real)


def curl(v):
    _require_vector(v)
    return SpectralVectorField(v.grid, curl_coeffs(v.grid, v.coeffs), real=v.real)


def leray_project(v):
    """Per mode ``(I - xi xi^T / |xi|^2)`` applied to the coefficient vector."""
    _require_vector(v)
    return SpectralVectorField(v.grid, leray_coeffs(v.grid, v.coeffs), real=v.real)


def biot_savart(J):
    """Inverse curl ``(-Laplacian)^{-1} curl J``."""
    _require_vector(J)
    return SpectralVectorField(J.grid, biot_savart_coeffs(J.grid, J.coeffs), real=J.real)


def spectral_cutoff(field, n):
    """Keep coefficients in the closed annulus ``1/n <= |xi| <= n``."""
    grid = field.grid
    n = float(n)
    if not n > 0:
        raise ConfigurationError(f"cutoff must be positive, got {n}")
    if n < grid.xi_min * (1 - 1e-12):
        raise ConfigurationError(
            f"cutoff {n} is below the smallest lattice frequency {grid.xi_min}")
    mask = annulus_mask(grid, 1.0 / n, n)
    out = field._like(field.coeffs * mask, keep_mean=False)
    out.meta["cutoff"] = n
    return out


def annulus_mask(grid, lo, hi, rtol=1e-12):
    r = grid.xi_norm
    return (r >= lo * (1 - rtol)) & (r <= hi * (1 + rtol))


# ---------------------------------------------------------------------------
# dealiased products
# ---------------------------------------------------------------------------
class Dealiaser:
    """Moves coefficient arrays to and from the physical product grid.

    ``two_thirds``: samples live on the native grid; inputs and outputs are
    truncated to ``|k_i| <= (N-1)//3`` on every axis.
    ``zero_pad_3halves``: samples live on a ``3N/2`` grid; inputs keep
    ``|k_i| < N/2`` and the output is truncated to the same box.
    Both are exact for inputs inside their band.
    """

    def __init__(self, grid):
        self.grid = grid
        self.rule = grid.dealias
        N = grid.N
        if self.rule == "two_thirds":
            self.M = N
        else:
            self.M = 3 * N // 2
            k = grid.k1d.astype(int)
            keep = np.abs(k) < N // 2
            self._src = np.nonzero(keep)[0]
            self._dst = (k[keep] % self.M)

    @property
    def product_shape(self):
        return (self.M,) * 3

    def out_of_band(self, c):
        """Largest coefficient magnitude lying outside the exact band."""
        mask = self.grid.band_mask
        tail = c[..., ~mask] if c.ndim > 3 else c[~mask]
        return float(np.max(np.abs(tail))) if tail.size else 0.0

    def lift(self, c):
        """Coefficients (..., N, N, N) -> physical samples on the product grid."""
        if self.rule == "two_thirds":
            return ifftn(c * self.grid.band_mask)
        lead = c.shape[:-3]
        big = np.zeros(lead + self.product_shape, np.complex128)
        s, d = self._src, self._dst
        big[(...,) + np.ix_(d, d, d)] = c[(...,) + np.ix_(s, s, s)]
        return ifftn(big)

    def lower(self, phys):
        """Physical product samples -> truncated coefficients on the native grid."""
        if self.rule == "two_thirds":
            return fftn(phys) * self.grid.band_mask
        big = fftn(phys)
        lead = big.shape[:-3]
        out = np.zeros(lead + self.grid.shape, np.complex128)
        s, d = self._src, self._dst
        out[(...,) + np.ix_(s, s, s)] = big[(...,) + np.ix_(d, d, d)]
        return out


_DEALIASERS = {}


def dealiaser(grid):
    d = _DEALIASERS.get(grid)
    if d is None:
        d = _DEALIASERS[grid] = Dealiaser(grid)
    return d


def _alias_meta(grid, *arrays):
    d = dealiaser(grid)
    worst = max(d.out_of_band(a) for a in arrays)
    scale = max(float(np.max(np.abs(a))) for a in arrays) or 1.0
    meta = {"dealias": grid.dealias, "mean_retained": True}
    if worst > 1e-14 * scale:
        meta["aliasing_warning"] = (
            f"input energy outside the exact product band (max |c| = {worst:.3e})")
    return meta


def _real_part_if(phys, real):
    return phys.real if real else phys


def pointwise_product(a, b):
    """Dealiased product ``a * b``; the mean of the result is kept."""
    if a.grid != b.grid:
        raise ConfigurationError("fields live on different grids")
    grid = a.grid
    d = dealiaser(grid)
    real = a.real and b.real
    pa = _real_part_if(d.lift(a.coeffs), real)
    pb = _real_part_if(d.lift(b.coeffs), real)
    meta = _alias_meta(grid, a.coeffs, b.coeffs)
    return SpectralField(grid, d.lower(pa * pb), real=real, meta=meta, keep_mean=True)


def tensor_product(u, v):
    """Dealiased ``(u (x) v)^{jk} = u^j v^k`` as a rank-2 field."""
    _require_vector(u)
    _require_vector(v)
    if u.grid != v.grid:
        raise ConfigurationError("fields live on different grids")
    grid = u.grid
    d = dealiaser(grid)
    real = u.real and v.real
    pu = _real_part_if(d.lift(u.coeffs), real)
    pv = _real_part_if(d.lift(v.coeffs), real)
    t = pu[:, None] * pv[None, :]
    meta = _alias_meta(grid, u.coeffs, v.coeffs)
    return SpectralTensorField(grid, d.lower(t), real=real, meta=meta, keep_mean=True)


def cross_product(u, v):
    """Dealiased pointwise ``u x v``."""
    _require_vector(u)
    _require_vector(v)
    if u.grid != v.grid:
        raise ConfigurationError("fields live on different grids")
    grid = u.grid
    d = dealiaser(grid)
    real = u.real and v.real
    pu = _real_part_if(d.lift(u.coeffs), real)
    pv = _real_part_if(d.lift(v.coeffs), real)
    meta = _alias_meta(grid, u.coeffs, v.coeffs)
    return SpectralVectorField(grid, d.lower(kernels.cross(pu, pv)), real=real,
                               meta=meta, keep_mean=True)


def dot_product(u, v):
    """Dealiased pointwise ``u . v``."""
    _require_vector(u)
    _require_vector(v)
    grid = u.grid
    d = dealiaser(grid)
    real = u.real and v.real
    pu = _real_part_if(d.lift(u.coeffs), real)
    pv = _real_part_if(d.lift(v.coeffs), real)
    meta = _alias_meta(grid, u.coeffs, v.coeffs)
    return SpectralField(grid, d.lower(np.sum(pu * pv, axis=0)), real=real,
                         meta=meta, keep_mean=True)


def advection(z, w):
    """``(z . grad) w`` computed as ``div (w (x) z)`` minus ``w div z``."""
    _require_vector(z)
    _require_vector(w)
    grid = z.grid
    t = tensor_product(w, z)
    out = tensor_div_coeffs(grid, t.coeffs)
    divz = div_coeffs(grid, z.coeffs)
    if np.any(divz != 0):
        corr = pointwise_product_vec_scalar(w, SpectralField(grid, divz, real=z.real))
        out = out - corr.coeffs
    return SpectralVectorField(grid, out, real=z.real and w.real)


def pointwise_product_vec_scalar(w, s):
    grid = w.grid
    d = dealiaser(grid)
    real = w.real and s.real
    pw = _real_part_if(d.lift(w.coeffs), real)
    ps = _real_part_if(d.lift(s.coeffs), real)
    return SpectralVectorField(grid, d.lower(pw * ps[None]), real=real, keep_mean=True)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------
def lp_norm_array(phys, p, volume, backend=None):
    """Rectangle-rule ``L^p`` norm of samples; components form a Euclidean vector.

    ``phys`` is ``(N, N, N)`` or ``(c, N, N, N)``; ``volume`` is the box volume.
    """
    p = float(p)
    if np.isinf(p):
        return kernels.norm_max(phys, backend=backend)
    if not p >= 1:
        raise ConfigurationError(f"L^p exponent must be >= 1, got {p}")
    npts = phys.shape[-1] * phys.shape[-2] * phys.shape[-3]
    total = kernels.norm_pow_sum(phys, p, backend=backend)
    return float((volume / npts * total) ** (1.0 / p))


def lp_norm(field, p):
    """``L^p`` norm of the mean-free part of a field (rectangle rule).

    For ``p = 2`` the exact Parseval sum over nonzero modes is used; it
    coincides with the rectangle rule on the grid.
    """
    grid = field.grid
    c = field.coeffs
    if c[(...,) + (0, 0, 0)].any():
        c = c.copy()
        c[(...,) + (0, 0, 0)] = 0
    p = float(p)
    if p == 2.0:
        return float(np.sqrt(grid.volume * np.sum(c.real ** 2 + c.imag ** 2)))
    phys = ifftn(c)
    if field.real:
        phys = phys.real
    return lp_norm_array(phys, p, grid.volume)


def random_field(grid, rng, vector=False, slope=-2.0, band=None, real=True,
                 divergence_free=False):
    """Random mean-zero band-limited field with power-law amplitudes ``|k|^slope``.

    ``band`` is the largest per-axis wavenumber kept (defaults to the grid's
    exact product band). Real fields are made Hermitian by symmetrizing.
    """
    shape = ((3,) if vector else ()) + grid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kn = np.sqrt(sum(k.astype(float) ** 2 for k in np.broadcast_arrays(*grid.k_axes())))
    kn[0, 0, 0] = 1.0
    c *= kn ** slope
    band = grid.band_limit if band is None else band
    m1 = np.abs(grid.k1d) <= band
    m1[grid.N // 2] = False
    c *= (m1[:, None, None] & m1[None, :, None] & m1[None, None, :])
    if real:
        c = 0.5 * (c + np.conj(hermitian_partner(c)))
    c[(...,) + (0, 0, 0)] = 0
    if vector:
        if divergence_free:
            c = leray_coeffs(grid, c)
        return SpectralVectorField(grid, c, real=real, divergence_free=divergence_free)
    return SpectralField(grid, c, real=real)
