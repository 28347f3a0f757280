"""Dyadic (Littlewood-Paley) analysis on the periodic lattice.

The partition is built from a smooth radial step ``chi`` equal to 1 on
``|xi| <= 3/4`` and 0 on ``|xi| >= 4/3``; the block profile is
``partition_phi(xi) = chi(xi/2) - chi(xi)`` and block ``j`` multiplies by
``partition_phi(2^-j xi)``. Telescoping makes the blocks sum to exactly one
on every nonzero lattice frequency once the j-range brackets the lattice.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import ConfigurationError, ParameterError
from .fields import SpectralVectorField
from .grid import ifftn
from .spectral import dealiaser, lp_norm_array

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0
PHI_SUPPORT = (0.75, 8.0 / 3.0)

_DENSE_CACHE_LIMIT = 64 ** 3


def _smooth_step_psi(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 1 for ``t <= 0``, 0 for ``t >= 1``, built from ``exp(-1/t)``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a = _smooth_step_psi(1.0 - t)
    b = _smooth_step_psi(t)
    return a / (a + b)


def chi(r):
    """Radial cutoff: 1 for ``r <= 3/4``, 0 for ``r >= 4/3``, C-infinity in between."""
    r = np.asarray(r, dtype=float)
    return smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))


def partition_phi(r):
    """Annular block profile ``chi(r/2) - chi(r)``, supported in ``[3/4, 8/3]``."""
    r = np.asarray(r, dtype=float)
    return chi(0.5 * r) - chi(r)


def _parse_exponent(x, name):
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "oo", "∞"):
            return math.inf
        x = float(x)
    x = float(x)
    if not (x >= 1.0):
        raise ParameterError(f"{name} must lie in [1, inf], got {x}")
    return x


@dataclass(frozen=True)
class BesovIndex:
    """Regularity ``s`` with integrability ``p`` and summation ``r`` in ``[1, inf]``."""

    s: float
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", _parse_exponent(self.p, "p"))
        object.__setattr__(self, "r", _parse_exponent(self.r, "r"))

    def __str__(self):
        return f"B^{self.s:g}_{{{_fmt(self.p)},{_fmt(self.r)}}}"


def _fmt(x):
    return "inf" if math.isinf(x) else f"{x:g}"


def lr_sum(values, r):
    """``l^r`` norm of a sequence of nonnegative numbers."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    if math.isinf(r):
        return float(np.max(v))
    m = np.max(v)
    if m == 0:
        return 0.0
    return float(m * np.sum((v / m) ** r) ** (1.0 / r))


class DyadicPartition:
    """Littlewood-Paley blocks ``j_min..j_max`` adapted to one grid."""

    def __init__(self, grid, margin=2, check=True):
        if int(margin) != margin or margin < 2:
            raise ConfigurationError(f"margin must be an integer >= 2, got {margin!r}")
        if grid.N < 8:
            raise ConfigurationError(
                f"resolution N={grid.N} is too small to keep fields {margin} blocks from the edges")
        self.grid = grid
        self.margin = int(margin)
        self.j_min = math.floor(math.log2(1.0 / grid.L)) - self.margin
        self.j_max = math.ceil(math.log2(grid.xi_max)) + self.margin
        self._dense = {}
        if check:
            self.check_partition()

    @property
    def blocks(self):
        return range(self.j_min, self.j_max + 1)

    def weight(self, j):
        """Lattice multiplier ``partition_phi(2^-j |xi|)`` (read-only)."""
        w = self._dense.get(j)
        if w is not None:
            return w
        if j < self.j_min or j > self.j_max:
            w = np.zeros(self.grid.shape)
        else:
            r = self.grid.xi_norm * 2.0 ** (-j)
            w = np.zeros(self.grid.shape)
            live = (r > PHI_SUPPORT[0]) & (r < PHI_SUPPORT[1])
            w[live] = partition_phi(r[live])
        w.setflags(write=False)
        if self.grid.N ** 3 <= _DENSE_CACHE_LIMIT:
            self._dense[j] = w
        return w

    def low_weight(self, j):
        """Symbol of ``S_j = sum_{j' <= j-1} Delta_j'``, which telescopes to ``chi(2^-j xi)``."""
        if j <= self.j_min:
            return np.zeros(self.grid.shape)
        j = min(j, self.j_max + 1)
        w = chi(self.grid.xi_norm * 2.0 ** (-j))
        w[0, 0, 0] = 0.0
        return w

    def check_partition(self, tol=1e-12):
        """Verify telescoping and two-block overlap on every lattice radius."""
        N, L = self.grid.N, self.grid.L
        m = np.arange(1, 3 * (N // 2) ** 2 + 1)
        radii = np.sqrt(m) / L
        total = np.zeros_like(radii)
        rows = []
        for j in self.blocks:
            w = partition_phi(radii * 2.0 ** (-j))
            total += w
            rows.append(w)
        err = float(np.max(np.abs(total - 1.0)))
        if err > tol:
            raise ConfigurationError(
                f"partition does not telescope on the lattice (error {err:.2e})")
        rows = np.array(rows)
        for gap in range(2, min(4, len(rows))):
            if np.any(rows[gap:] * rows[:-gap] != 0):
                raise ConfigurationError("non-adjacent blocks overlap")
        self.telescoping_error = err
        return err


_PARTITIONS = {}


def build_partition(grid, margin=2):
    """Cached :class:`DyadicPartition` for ``grid``."""
    key = (grid, int(margin) if int(margin) == margin else margin)
    part = _PARTITIONS.get(key)
    if part is None:
        part = _PARTITIONS[key] = DyadicPartition(grid, margin)
    return part


def _check_grid(part, u):
    if u.grid != part.grid:
        raise ConfigurationError("partition and field live on different grids")


def delta_j(part, u, j):
    """Block ``Delta_j u``; zero outside the partition range."""
    _check_grid(part, u)
    return u._like(u.coeffs * part.weight(j), keep_mean=False)


def s_j(part, u, j):
    """Low-frequency cutoff ``S_j u = sum_{j' <= j-1} Delta_j' u``."""
    _check_grid(part, u)
    return u._like(u.coeffs * part.low_weight(j), keep_mean=False)


def decompose(part, u, skip_empty=True):
    """List of ``(j, Delta_j u)``; blocks carrying no coefficients are omitted."""
    out = []
    for j in part.blocks:
        b = delta_j(part, u, j)
        if skip_empty and not b.coeffs.any():
            continue
        out.append((j, b))
    return out


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------
def _block_samples(part, coeffs, j, oversample=1, real=True):
    c = coeffs * part.weight(j)
    if oversample > 1:
        c = _zero_pad(c, part.grid.N * oversample)
    phys = ifftn(c)
    return phys.real if real else phys


def _zero_pad(c, M):
    N = c.shape[-1]
    k = np.fft.fftfreq(N, 1.0 / N).astype(int)
    keep = np.abs(k) < N // 2
    src = np.nonzero(keep)[0]
    dst = k[keep] % M
    out = np.zeros(c.shape[:-3] + (M, M, M), np.complex128)
    out[(...,) + np.ix_(dst, dst, dst)] = c[(...,) + np.ix_(src, src, src)]
    return out


def block_lp_norms(part, u, p, oversample=1):
    """Dict ``j -> ||Delta_j u||_{L^p}`` over the partition range (empty blocks give 0)."""
    _check_grid(part, u)
    return block_lp_norms_coeffs(part, u.coeffs, p, oversample, u.real)


def block_lp_norms_coeffs(part, coeffs, p, oversample=1, real=True):
    """As :func:`block_lp_norms` for a raw ``(..., N, N, N)`` coefficient stack."""
    p = _parse_exponent(p, "p")
    grid = part.grid
    out = {}
    power = coeffs.real ** 2 + coeffs.imag ** 2
    if power.ndim > 3:
        power = power.reshape((-1,) + grid.shape).sum(axis=0)
    for j in part.blocks:
        w = part.weight(j)
        e = float(np.sum(w * w * power))
        if e == 0.0:
            out[j] = 0.0
        elif p == 2.0 and oversample == 1:
            out[j] = math.sqrt(grid.volume * e)
        else:
            phys = _block_samples(part, coeffs, j, oversample, real)
            out[j] = lp_norm_array(phys, p, grid.volume)
    return out


def besov_norm_coeffs(part, coeffs, idx, real=True, oversample=1):
    """Besov norm of a raw coefficient stack (components combine pointwise)."""
    idx = idx if isinstance(idx, BesovIndex) else BesovIndex(*idx)
    norms = block_lp_norms_coeffs(part, coeffs, idx.p, oversample, real)
    return lr_sum([2.0 ** (j * idx.s) * v for j, v in norms.items()], idx.r)


def besov_norm(part, u, idx, oversample=1):
    """Homogeneous Besov norm: ``l^r`` over j of ``2^{js} ||Delta_j u||_{L^p}``.

    Vector and tensor fields use the pointwise Euclidean norm over components.
    ``p = inf`` is the grid maximum; ``oversample`` zero-pads blocks before
    sampling, for convergence checks of non-even exponents.
    """
    _check_grid(part, u)
    return besov_norm_coeffs(part, u.coeffs, idx, u.real, oversample)


def triebel_lizorkin_norm(part, u, idx):
    """``L^p`` norm of the pointwise ``l^r`` sequence ``2^{js} |Delta_j u(x)|``."""
    idx = idx if isinstance(idx, BesovIndex) else BesovIndex(*idx)
    _check_grid(part, u)
    if math.isinf(idx.p) and not math.isinf(idx.r):
        raise ParameterError("Triebel-Lizorkin norms with p = inf require r = inf")
    grid = part.grid
    acc = np.zeros(grid.N ** 3)
    for j in part.blocks:
        w = part.weight(j)
        if not np.any(w * np.abs(u.coeffs).reshape((-1,) + grid.shape).sum(axis=0)):
            continue
        phys = _block_samples(part, u.coeffs, j, real=u.real)
        flat = phys.reshape(-1, grid.N ** 3) if phys.ndim > 3 else phys.reshape(1, -1)
        if np.iscomplexobj(flat):
            flat = np.concatenate([flat.real, flat.imag])
        kernels.lr_accumulate(acc, np.ascontiguousarray(flat), 2.0 ** (j * idx.s), idx.r)
    if not math.isinf(idx.r):
        acc = acc ** (1.0 / idx.r)
    return lp_norm_array(acc.reshape(grid.shape), idx.p, grid.volume)


# ---------------------------------------------------------------------------
# Bony calculus
# ---------------------------------------------------------------------------
def _same_kind(u, v):
    if u.grid != v.grid:
        raise ConfigurationError("fields live on different grids")
    if type(u) is not type(v):
        raise ConfigurationError("paraproduct arguments must both be scalar or both vector")


def _product_op(u):
    """Pointwise product used by Bony calculus: scalar times scalar, or cross product."""
    if isinstance(u, SpectralVectorField):
        return kernels.cross
    return np.multiply


def _finish(u, v, phys, meta):
    grid = u.grid
    coeffs = dealiaser(grid).lower(phys)
    cls = type(u)
    return cls(grid, coeffs, real=u.real and v.real, meta=meta, keep_mean=True)


def _lifted_blocks(part, u):
    d = dealiaser(part.grid)
    out = {}
    for j in part.blocks:
        c = u.coeffs * part.weight(j)
        if c.any():
            p = d.lift(c)
            out[j] = p.real if u.real else p
    return out


def _alias_meta(part, *fields):
    d = dealiaser(part.grid)
    meta = {}
    worst = max(d.out_of_band(f.coeffs) for f in fields)
    if worst > 0:
        meta["aliasing_warning"] = f"input energy outside the exact product band ({worst:.3e})"
    return meta


def paraproduct_T(part, u, v):
    """``T_u v = sum_j S_{j-1}u Delta_j v`` with ``S_{j-1} = sum_{j' <= j-2} Delta_j'``.

    Vector arguments use the cross product as the pointwise product.
    """
    _same_kind(u, v)
    _check_grid(part, u)
    op = _product_op(u)
    ub = _lifted_blocks(part, u)
    vb = _lifted_blocks(part, v)
    acc = None
    low = None
    for j in range(part.j_min, part.j_max + 1):
        if (j - 2) in ub:
            low = ub[j - 2] if low is None else low + ub[j - 2]
        if low is not None and j in vb:
            term = op(low, vb[j])
            acc = term if acc is None else acc + term
    if acc is None:
        acc = np.zeros(((3,) if isinstance(u, SpectralVectorField) else ())
                       + dealiaser(part.grid).product_shape)
    return _finish(u, v, acc, _alias_meta(part, u, v))


def remainder_R(part, u, v):
    """``R(u, v) = sum_{|j-k| <= 1} Delta_j u Delta_k v``."""
    _same_kind(u, v)
    _check_grid(part, u)
    op = _product_op(u)
    ub = _lifted_blocks(part, u)
    vb = _lifted_blocks(part, v)
    acc = None
    for j, pu in ub.items():
        near = [vb[k] for k in (j - 1, j, j + 1) if k in vb]
        if not near:
            continue
        term = op(pu, sum(near[1:], near[0]))
        acc = term if acc is None else acc + term
    if acc is None:
        acc = np.zeros(((3,) if isinstance(u, SpectralVectorField) else ())
                       + dealiaser(part.grid).product_shape)
    return _finish(u, v, acc, _alias_meta(part, u, v))


def product(u, v):
    """Dealiased pointwise product (cross product for vector fields)."""
    _same_kind(u, v)
    d = dealiaser(u.grid)
    pu, pv = d.lift(u.coeffs), d.lift(v.coeffs)
    if u.real and v.real:
        pu, pv = pu.real, pv.real
    return _finish(u, v, _product_op(u)(pu, pv), {})


def commutator(part, j, b, a):
    """``[Delta_j, b] a = Delta_j(b a) - b Delta_j a`` with one dealiasing rule for both terms.

    Scalars multiply pointwise; for vector ``b`` and ``a`` the product is
    ``b x a``, the form in which the commutator enters the magnetic estimate.
    """
    _same_kind(a, b)
    _check_grid(part, a)
    ba = product(b, a)
    first = delta_j(part, ba, j)
    second = product(b, delta_j(part, a, j))
    return type(a)(a.grid, first.coeffs - second.coeffs, real=a.real and b.real,
                   keep_mean=True)


def commutator_blocks(part, b, a):
    """Dict ``j -> [Delta_j, b] a`` coefficients over blocks where either term is nonzero."""
    _same_kind(a, b)
    d = dealiaser(part.grid)
    op = _product_op(a)
    real = a.real and b.real
    pb = d.lift(b.coeffs)
    pb = pb.real if real else pb
    ba = product(b, a).coeffs
    out = {}
    for j in part.blocks:
        w = part.weight(j)
        first = ba * w
        aj = a.coeffs * w
        if not (first.any() or aj.any()):
            continue
        pa = d.lift(aj)
        pa = pa.real if real else pa
        out[j] = first - d.lower(op(pb, pa))
    return out
