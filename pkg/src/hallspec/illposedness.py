"""Norm-inflation experiment for the stationary Navier-Stokes map.

Forces are built from wave packets ("atoms")

    b_n = n^{-1/(2r)} sum_{k in K(n)} 2^k phi(2^k A (x - x_k)) sin((17/12) 2^n x.e),
    c_n = F^{-1}[(xi_2 - xi_1) b_n^(xi) / xi_2],   g_n = (b_n, c_n - b_n, 0),

with ``phi(x) = theta(x1) theta(x2) theta(x3) sin(17 x3 / 24)``,
``A = diag(eps, eps, 1)``, ``e = (1, 1, 0)/sqrt 2`` and ``r = 3/(2 + eps)``.
The data ``f_n = -mu Lap g_n`` have first Picard iterate ``g_n`` and second
``G_n = N(g_n, g_n) = -(-mu Lap)^{-1} P div(g_n (x) g_n)``. The quantities
of interest are ``||g_n||_{B^0_{3,1}}`` (small) against the seminorm of
``G_n`` restricted to the envelope blocks ``K(n)`` (bounded below).

Desk-scale adaptations, recorded in every sweep row:

* ``recenter_shift``: all frequencies are divided by ``2^s`` with the
  Navier-Stokes scaling ``u -> lam u(lam x)``, ``lam = 2^-s``, which leaves
  every ``B^0_3`` norm unchanged and moves block ``j`` to ``j - s``.
* ``kappa``: ``theta^`` equals 1 on ``|xi| <= kappa/600`` and 0 on
  ``|xi| >= kappa/300``; ``kappa = 1`` is the asymptotic profile, larger
  values widen the envelope spectrum so that it spans several lattice cells.
* ``relaxed_all_k``: ``K(n)`` is the set of consecutive scales
  ``n - gap_max .. n - gap_min`` instead of ``{k in 8N : n/4 <= k <= n/2}``
  (empty below ``n = 16``).
* atom centers are explicit box positions (the translations ``2^{2n+k} e``
  are meaningless on a torus); only their separation matters.

Coefficients are exact samples of the continuum transform, so the field on
the grid is the periodization of the continuum packet sum. The sweep works
on half spectra (real transforms) so that ``256^3`` rows fit in memory.
"""
import csv
import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft
from scipy.special import gamma

from . import kernels
from . import spectral as S
from .errors import ConfigurationError, SynthesisError
from .fields import SpectralField, SpectralVectorField
from .grid import Grid, get_threads
from .littlewood_paley import (PHI_SUPPORT, build_partition, lr_sum, partition_phi,
                               smooth_step)

BLOCK_RULES = ("paper_8N", "relaxed_all_k")
CARRIER = 17.0 / 12.0
BUMP_FREQ = 17.0 / 24.0
E_DIR = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
SWEEP_COLUMNS = ("n", "epsilon", "r", "grid_N", "recenter_shift", "block_rule",
                 "norm_g_B031", "norm_f_Bm231", "seminorm_Gn", "seminorm_Un", "feasible")
EXTRA_COLUMNS = ("kappa", "n_atoms", "designated_block", "localization", "div_defect",
                 "seminorm_gn", "norm_Gn_B031", "picard_iterations", "adaptations", "reason")


class AggregationError(SynthesisError):
    """Atoms overlap too much for the disjoint-support aggregation."""


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------
class ProfileLibrary:
    """The 1-D profile ``theta`` (given by its transform) and the bump ``phi``.

    ``theta^(eta) = smooth_step((|eta| - a) / a)`` with ``a = kappa/600``, so
    it is 1 on ``|eta| <= kappa/600`` and 0 on ``|eta| >= kappa/300``.
    Physical values come from the cosine integral of ``theta^`` (trapezoid
    rule on the support, spectrally accurate for this smooth profile).
    """

    def __init__(self, kappa=1.0, nodes=4097):
        kappa = float(kappa)
        if not kappa > 0:
            raise ConfigurationError(f"kappa must be positive, got {kappa}")
        self.kappa = kappa
        self.a = kappa / 600.0
        self.support = kappa / 300.0
        self._eta = np.linspace(0.0, self.support, int(nodes))
        w = np.full(self._eta.size, self._eta[1] - self._eta[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        self._w = w * self.theta_hat(self._eta) / math.pi
        self._cache = {}

    def theta_hat(self, eta):
        eta = np.abs(np.asarray(eta, dtype=float))
        return smooth_step((eta - self.a) / self.a)

    def theta(self, x, chunk=4096):
        """``theta(x) = (1/pi) int_0^inf theta^(eta) cos(eta x) d eta``."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.size)
        for i in range(0, flat.size, chunk):
            out[i:i + chunk] = np.cos(np.outer(flat[i:i + chunk], self._eta)) @ self._w
        return out.reshape(x.shape)

    def phi_hat(self, eta1, eta2, eta3):
        """Transform of ``phi`` (convention ``f^(xi) = int f e^{-i x.xi}``)."""
        t3 = (self.theta_hat(eta3 - BUMP_FREQ) - self.theta_hat(eta3 + BUMP_FREQ)) / 2j
        return self.theta_hat(eta1) * self.theta_hat(eta2) * t3

    def phi_bump(self, x1, x2, x3):
        return self.theta(x1) * self.theta(x2) * self.theta(x3) * np.sin(BUMP_FREQ * x3)

    def _samples(self):
        s = self._cache.get("samples")
        if s is None:
            x = np.linspace(0.0, 400.0 / self.a, 200001)
            s = self._cache["samples"] = (x, self.theta(x))
        return s

    @staticmethod
    def _half_line(x, y):
        # trapezoid rule for an even integrand, doubled to cover the line
        return 2.0 * float(np.sum(0.5 * (y[1:] + y[:-1])) * (x[1] - x[0]))

    def integrals(self, p):
        """``(int |theta|^p, int |theta(y) sin(17 y / 24)|^p)`` over the line."""
        key = ("int", float(p))
        if key not in self._cache:
            x, t = self._samples()
            i1 = self._half_line(x, np.abs(t) ** p)
            # resolve the oscillating factor with at least 128 points per period
            step = min(x[1] - x[0], 2.0 * math.pi / BUMP_FREQ / 128.0)
            xf = np.linspace(0.0, x[-1], int(math.ceil(x[-1] / step)) + 1)
            tf = np.interp(xf, x, t)
            i2 = self._half_line(xf, np.abs(tf * np.sin(BUMP_FREQ * xf)) ** p)
            self._cache[key] = (i1, i2)
        return self._cache[key]

    def inner_fraction(self, p, R):
        """Fraction of ``int |theta|^p`` carried by ``|y| <= R``."""
        x, t = self._samples()
        dens = np.abs(t) ** p
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(x))])
        return float(min(1.0, np.interp(R, x, cum) / cum[-1]))


def sine_power_mean(p):
    """Average of ``|sin|^p`` over a period."""
    return float(gamma((p + 1) / 2) / (math.sqrt(math.pi) * gamma(p / 2 + 1)))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AtomSpec:
    """One packet after recentering: envelope scale ``D = lam 2^k A``."""

    k: int
    center: tuple
    carrier_freq: float
    envelope: tuple
    amplitude: float


@dataclass(frozen=True)
class InflationConfig:
    """Parameters of one inflation row.

    ``placement`` lists atom centers as fractions of the box (default: evenly
    spaced along the main diagonal). ``recenter_shift`` defaults to
    ``n - target_block``. ``desk_gaps`` gives ``(gap_min, gap_max)`` for the
    relaxed scale set.
    """

    n: int
    epsilon: float = 1.0
    block_set_rule: str = "relaxed_all_k"
    placement: tuple = None
    recenter_shift: int = None
    kappa: float = 450.0
    desk_gaps: tuple = (3, 4)
    grid_N: int = 256
    box_L: float = 1.0
    mu: float = 1.0
    target_block: int = 6
    min_envelope_cells: float = 2.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        eps = float(self.epsilon)
        if not 0 < eps <= 1:
            raise ConfigurationError(f"epsilon must lie in (0, 1], got {eps}")
        object.__setattr__(self, "epsilon", eps)
        if self.block_set_rule not in BLOCK_RULES:
            raise ConfigurationError(
                f"block_set_rule must be one of {BLOCK_RULES}, got {self.block_set_rule!r}")
        gmin, gmax = (int(g) for g in self.desk_gaps)
        if not 1 <= gmin <= gmax:
            raise ConfigurationError(
                f"desk_gaps must satisfy 1 <= min <= max, got {self.desk_gaps}")
        object.__setattr__(self, "desk_gaps", (gmin, gmax))
        if self.placement is not None:
            pl = tuple(tuple(float(c) for c in p) for p in self.placement)
            if any(len(p) != 3 for p in pl):
                raise ConfigurationError("placement entries must be 3-vectors")
            object.__setattr__(self, "placement", pl)
        if self.recenter_shift is not None:
            object.__setattr__(self, "recenter_shift", int(self.recenter_shift))
        if not float(self.mu) > 0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")

    @property
    def r(self):
        return 3.0 / (2.0 + self.epsilon)

    @property
    def shift(self):
        return self.n - self.target_block if self.recenter_shift is None else self.recenter_shift

    @property
    def scales(self):
        """The envelope scales ``K(n)`` (unshifted)."""
        n = self.n
        if self.block_set_rule == "paper_8N":
            lo = math.ceil(n / 4)
            return tuple(k for k in range(max(8, lo), n // 2 + 1) if k % 8 == 0)
        gmin, gmax = self.desk_gaps
        return tuple(k for k in range(n - gmax, n - gmin + 1) if k >= 1)

    @property
    def blocks(self):
        """``K(n)`` after recentering: the blocks where ``G_n`` is measured."""
        return tuple(k - self.shift for k in self.scales)

    @property
    def designated_block(self):
        return self.n - self.shift

    def grid(self):
        return Grid(int(self.grid_N), float(self.box_L))

    def adaptations(self):
        out = []
        if self.shift:
            out.append(f"recenter_shift={self.shift}")
        if self.kappa != 1.0:
            out.append(f"kappa={self.kappa:g}")
        if self.block_set_rule == "relaxed_all_k":
            out.append(f"relaxed_gaps={self.desk_gaps[0]}-{self.desk_gaps[1]}")
        out.append("placement=" + ("explicit" if self.placement else "diagonal"))
        return out

    def to_dict(self):
        d = asdict(self)
        d["r"] = self.r
        d["scales"] = list(self.scales)
        d["blocks"] = list(self.blocks)
        d["shift"] = self.shift
        return d


def atom_specs(cfg):
    """Recentered :class:`AtomSpec` list for ``cfg``."""
    ks = cfg.scales
    if not ks:
        raise SynthesisError(
            f"the scale set for n={cfg.n} under {cfg.block_set_rule} is empty")
    lam = 2.0 ** (-cfg.shift)
    eps = cfg.epsilon
    amp0 = cfg.n ** (-1.0 / (2.0 * cfg.r))
    box = 2.0 * math.pi * cfg.box_L
    if cfg.placement is None:
        m = len(ks)
        centers = [tuple(box * i / m for _ in range(3)) for i in range(m)]
    else:
        if len(cfg.placement) != len(ks):
            raise ConfigurationError(
                f"placement has {len(cfg.placement)} centers for {len(ks)} atoms")
        centers = [tuple(box * c for c in p) for p in cfg.placement]
    out = []
    for k, c in zip(ks, centers):
        d = lam * 2.0 ** k
        out.append(AtomSpec(k=k, center=c, carrier_freq=lam * CARRIER * 2.0 ** cfg.n,
                            envelope=(d * eps, d * eps, d), amplitude=lam * amp0 * 2.0 ** k))
    return out


def _required_N(kmax):
    N = 4
    while Grid(N).band_limit < kmax:
        N *= 2
    return N


def check_feasible(cfg, grid, profiles=None):
    """Raise :class:`SynthesisError` unless every packet fits the grid.

    Checks the exact product band, envelope resolution (support radius of
    at least ``cfg.min_envelope_cells`` lattice cells), ``xi_2 != 0`` on the
    support, and that the designated block lies inside the partition range.
    """
    prof = profiles or ProfileLibrary(cfg.kappa)
    L = grid.L
    sup = prof.support
    worst = 0.0
    for at in atom_specs(cfg):
        w = at.carrier_freq / math.sqrt(2.0)
        d1, d2, d3 = at.envelope
        axis12 = L * (w + sup * max(d1, d2))
        axis3 = L * d3 * (BUMP_FREQ + sup)
        worst = max(worst, axis12, axis3)
        if L * sup * min(d1, d2, d3) < cfg.min_envelope_cells:
            raise SynthesisError(
                f"envelope of scale k={at.k} spans {L * sup * min(d1, d2, d3):.3g} lattice "
                f"cells (< {cfg.min_envelope_cells}); use a larger kappa or box")
        if w - sup * d2 <= 0:
            raise SynthesisError(f"xi_2 = 0 lies inside the support of the k={at.k} packet")
    if worst > grid.band_limit:
        raise SynthesisError(
            f"packets reach lattice frequency {worst:.1f} beyond the exact band "
            f"{grid.band_limit} of N={grid.N}; needs N >= {_required_N(worst)} "
            f"or a larger recenter_shift")
    part = build_partition(grid)
    if not part.j_min <= cfg.designated_block <= part.j_max:
        raise SynthesisError(f"designated block {cfg.designated_block} outside the partition")
    return True


# ---------------------------------------------------------------------------
# half-spectrum helpers
# ---------------------------------------------------------------------------
def _h(N):
    return N // 2 + 1


def _half(c):
    return c[..., :_h(c.shape[-1])]


def _irfft(h, N):
    return sfft.irfftn(h, s=(N, N, N), axes=(-3, -2, -1), norm="forward",
                       workers=get_threads())


def _rfft(x):
    return sfft.rfftn(x, axes=(-3, -2, -1), norm="forward", workers=get_threads())


def full_from_half(h, N):
    """Rebuild a Hermitian ``(..., N, N, N)`` array from its ``k3 >= 0`` half."""
    out = np.empty(h.shape[:-1] + (N,), np.complex128)
    out[..., :_h(N)] = h
    tail = h[..., 1:N // 2][..., ::-1]
    tail = np.roll(np.flip(tail, axis=(-3, -2)), 1, axis=(-3, -2))
    out[..., _h(N):] = np.conj(tail)
    return out


def _half_weights(N):
    """Parseval multiplicity of each half-spectrum entry (1 on the k3=0 and Nyquist planes)."""
    w = np.full(_h(N), 2.0)
    w[0] = 1.0
    w[N // 2] = 1.0
    return w


def _half_sq(grid):
    xs = grid.xi_sq
    return xs[..., :_h(grid.N)]


def _energy_half(grid, h, weight=None):
    p = h.real ** 2 + h.imag ** 2
    if p.ndim > 3:
        p = p.sum(axis=0)
    if weight is not None:
        p = p * weight
    return float(np.sum(p * _half_weights(grid.N)))


def _block_weight_half(grid, j):
    r = grid.xi_norm[..., :_h(grid.N)] * 2.0 ** (-j)
    w = np.zeros(r.shape)
    live = (r > PHI_SUPPORT[0]) & (r < PHI_SUPPORT[1])
    w[live] = partition_phi(r[live])
    return w


def block_lp_norms_half(grid, h, p, blocks=None):
    """``{j: ||Delta_j v||_{L^p}}`` for a real field given by its half spectrum.

    Components are combined pointwise (Euclidean). Blocks with zero energy
    are reported as 0 without a transform.
    """
    part = build_partition(grid)
    blocks = part.blocks if blocks is None else blocks
    h = h if h.ndim == 4 else h[None]
    N = grid.N
    out = {}
    for j in blocks:
        w = _block_weight_half(grid, j)
        if not np.any(w) or _energy_half(grid, h, w * w) == 0.0:
            out[j] = 0.0
            continue
        acc = None
        for comp in h:
            if not np.any(comp):
                continue
            v = _irfft(comp * w, N)
            acc = v * v if acc is None else acc + v * v
        if p == 2.0:
            out[j] = math.sqrt(grid.volume / N ** 3 * float(np.sum(acc)))
        else:
            out[j] = S.lp_norm_array(np.sqrt(acc), p, grid.volume)
    return out


def lp_norm_half(grid, h, p, oversample=1):
    """``L^p`` norm of the trigonometric polynomial with half spectrum ``h``.

    The rectangle rule is averaged over ``oversample^3`` sub-cell shifts of
    the grid, which equals the rectangle rule on a grid refined by that
    factor. Carriers close to a quarter of the sampling rate need this: on
    the plain grid the samples only see a few phases of ``|sin|^p``.
    """
    h = h if h.ndim == 4 else h[None]
    N, f = grid.N, int(oversample)
    x1, x2, x3 = grid.xi_axes()
    x3 = x3[..., :_h(N)]
    cell = 2.0 * math.pi * grid.L / N
    total = 0.0
    for shift in np.ndindex(f, f, f):
        d = np.array(shift) * cell / f
        phase = np.exp(1j * (x1 * d[0] + x2 * d[1] + x3 * d[2])) if any(shift) else 1.0
        acc = None
        for comp in h:
            if np.any(comp):
                v = _irfft(comp * phase, N)
                acc = v * v if acc is None else acc + v * v
        if acc is not None:
            total += float(np.sum(acc ** (p / 2.0)))
    return (grid.volume / (N * f) ** 3 * total) ** (1.0 / p)


def besov_norm_half(grid, h, s, p, r):
    norms = block_lp_norms_half(grid, h, p)
    return lr_sum([2.0 ** (j * s) * v for j, v in norms.items()], r)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------
def _bn_half(cfg, grid, profiles=None):
    prof = profiles or ProfileLibrary(cfg.kappa)
    check_feasible(cfg, grid, prof)
    N, L = grid.N, grid.L
    x1 = grid.xi1d
    x3 = grid.xi1d[:_h(N)]
    x3 = np.where(np.arange(x3.size) == N // 2, 0.0, x3)
    out = np.zeros((N, N, _h(N)), np.complex128)
    vol = (2.0 * math.pi * L) ** 3
    for at in atom_specs(cfg):
        d1, d2, d3 = at.envelope
        c1, c2, c3 = at.center
        w = at.carrier_freq / math.sqrt(2.0)
        f3 = (prof.theta_hat(x3 / d3 - BUMP_FREQ) - prof.theta_hat(x3 / d3 + BUMP_FREQ)) / 2j
        f3 = f3 * np.exp(-1j * c3 * x3)
        pref = at.amplitude / (d1 * d2 * d3) / vol / 2j
        for sgn in (1.0, -1.0):
            s1 = x1 - sgn * w
            f1 = prof.theta_hat(s1 / d1) * np.exp(-1j * c1 * s1)
            f2 = prof.theta_hat(s1 / d2) * np.exp(-1j * c2 * s1)
            out += (sgn * pref) * (f1[:, None, None] * f2[None, :, None] * f3[None, None, :])
    out[0, 0, 0] = 0.0
    # exact Hermitian symmetry on the self-conjugate planes
    for k3 in (0, N // 2):
        plane = out[..., k3]
        partner = np.roll(np.flip(plane, axis=(0, 1)), 1, axis=(0, 1))
        out[..., k3] = 0.5 * (plane + np.conj(partner))
    return out


def _cn_from_bn_half(grid, bh):
    N = grid.N
    x1 = grid.xi1d[:, None, None]
    x2 = grid.xi1d[None, :, None]
    live = bh != 0
    bad = live & (x2 == 0)
    if np.any(bad):
        raise SynthesisError("xi_2 = 0 inside the support of b_n")
    safe = np.where(x2 == 0, 1.0, x2)
    ch = np.where(live, (x2 - x1) / safe * bh, 0.0)
    return ch.astype(np.complex128).reshape(N, N, _h(N))


def gn_half(cfg, grid, profiles=None):
    """Half spectra ``(b_n, c_n, g_n)`` with ``g_n`` as a (3, N, N, N/2+1) array."""
    bh = _bn_half(cfg, grid, profiles)
    ch = _cn_from_bn_half(grid, bh)
    gh = np.zeros((3,) + bh.shape, np.complex128)
    gh[0] = bh
    gh[1] = ch - bh
    return bh, ch, gh


def synthesize_bn(cfg, grid=None, profiles=None):
    grid = grid or cfg.grid()
    bh = _bn_half(cfg, grid, profiles)
    return SpectralField(grid, full_from_half(bh, grid.N), meta={"config": cfg.to_dict()})


def synthesize_cn(cfg, grid=None, profiles=None):
    grid = grid or cfg.grid()
    ch = _cn_from_bn_half(grid, _bn_half(cfg, grid, profiles))
    return SpectralField(grid, full_from_half(ch, grid.N), meta={"config": cfg.to_dict()})


def synthesize_gn(cfg, grid=None, profiles=None):
    """``g_n = (b_n, c_n - b_n, 0)``; divergence-free by construction."""
    grid = grid or cfg.grid()
    _, _, gh = gn_half(cfg, grid, profiles)
    g = SpectralVectorField(grid, full_from_half(gh, grid.N), meta={"config": cfg.to_dict()})
    g.meta["div_defect"] = g.divergence_defect()
    return g


def divergence_defect_half(grid, gh):
    x1, x2, x3 = grid.xi_axes()
    d = x1 * gh[0] + x2 * gh[1] + x3[..., :_h(grid.N)] * gh[2]
    scale = float(np.max(grid.xi_norm[..., :_h(grid.N)] * np.sqrt(np.sum(np.abs(gh) ** 2, 0))))
    return float(np.max(np.abs(d))) / scale if scale else 0.0


def localization(grid, gh, j):
    """Fraction of the ``L^2`` energy of a field in block ``j``: ``||Delta_j g||^2 / ||g||^2``."""
    w = _block_weight_half(grid, j)
    tot = _energy_half(grid, gh)
    return _energy_half(grid, gh, w * w) / tot if tot else 0.0


# ---------------------------------------------------------------------------
# the bilinear map
# ---------------------------------------------------------------------------
def ns_bilinear(u, v, mu=1.0):
    """``N(u, v) = -(-mu Laplacian)^{-1} P div(u (x) v)``."""
    grid = u.grid
    t = S.tensor_product(u, v)
    c = S.tensor_div_coeffs(grid, t.coeffs)
    c = S.leray_coeffs(grid, c) * grid.inv_xi_sq * (-1.0 / mu)
    return SpectralVectorField(grid, c, real=u.real and v.real, meta=t.meta)


def ns_bilinear_half(grid, h, mu=1.0):
    """``N(u, u)`` for a real field held as a (3, N, N, N/2+1) half spectrum.

    Uses the symmetry of ``u (x) u`` (six products) and the grid's two-thirds
    band; the input must lie inside the exact band.
    """
    if grid.dealias != "two_thirds":
        raise ConfigurationError("the half-spectrum path implements the two-thirds rule only")
    N = grid.N
    band = grid.band_mask[..., :_h(N)]
    phys = [None if not np.any(c) else _irfft(c * band, N) for c in h]
    xs = (grid.xi_axes(odd=True)[0], grid.xi_axes(odd=True)[1],
          grid.xi_axes(odd=True)[2][..., :_h(N)])
    div = np.zeros(h.shape, np.complex128)
    for j in range(3):
        for m in range(j, 3):
            if phys[j] is None or phys[m] is None:
                continue
            t = _rfft(phys[j] * phys[m])
            div[j] += 1j * xs[m] * t
            if m != j:
                div[m] += 1j * xs[j] * t
    div *= band
    kx, ky, kz = grid.xi1d, grid.xi1d, grid.xi1d[:_h(N)]
    out = kernels.leray_project(div, kx, ky, kz)
    out *= grid.inv_xi_sq[..., :_h(N)] * (-1.0 / mu)
    return out


def compute_Gn(cfg, grid=None, mu=None, g=None):
    """``G_n = N(g_n, g_n)`` as a full vector field.

    ``meta`` records the block seminorm over ``K(n)`` and the share of the
    ``L^2`` energy of ``G_n`` that lands in those blocks.
    """
    grid = grid or cfg.grid()
    mu = cfg.mu if mu is None else mu
    if g is None:
        _, _, gh = gn_half(cfg, grid)
    else:
        gh = _half(g.coeffs)
    Gh = ns_bilinear_half(grid, gh, mu)
    G = SpectralVectorField(grid, full_from_half(Gh, grid.N))
    tot = _energy_half(grid, Gh)
    low = sum(_energy_half(grid, Gh, _block_weight_half(grid, j) ** 2) for j in cfg.blocks)
    G.meta.update(block_seminorm=seminorm_block_half(grid, Gh, cfg.blocks, cfg.r),
                  block_energy_share=low / tot if tot else 0.0, blocks=list(cfg.blocks))
    return G


# ---------------------------------------------------------------------------
# block seminorm
# ---------------------------------------------------------------------------
def _check_blocks(grid, blocks):
    blocks = tuple(int(j) for j in blocks)
    if not blocks:
        raise ConfigurationError("the block set is empty")
    part = build_partition(grid)
    for j in blocks:
        if not part.j_min <= j <= part.j_max:
            raise ConfigurationError(
                f"block {j} lies outside the partition range {part.j_min}..{part.j_max}")
    return blocks


def seminorm_block_half(grid, h, blocks, q):
    blocks = _check_blocks(grid, blocks)
    norms = block_lp_norms_half(grid, h, 3.0, blocks)
    return lr_sum([norms[j] for j in blocks], float(q))


def seminorm_block(part, u, blocks, q):
    """``(sum_{j in blocks} ||Delta_j u||_{L^3}^q)^{1/q}`` over the given blocks."""
    if u.grid != part.grid:
        raise ConfigurationError("field and partition live on different grids")
    if not u.real:
        raise ConfigurationError("the block seminorm is implemented for real fields")
    return seminorm_block_half(u.grid, _half(u.coeffs), blocks, q)


# ---------------------------------------------------------------------------
# semianalytic norms
# ---------------------------------------------------------------------------
def _torus_sep(a, b, box):
    d = np.abs(np.asarray(a) - np.asarray(b)) % box
    return np.minimum(d, box - d)


def semianalytic_atom_norms(cfg, p, tol=0.05, profiles=None):
    """``L^p`` norms of the packets of ``b_n`` from 1-D quadratures.

    Each packet is ``amp * phi(D(x - x0)) * sin(w e.x)``; the carrier is
    averaged (``mean |sin|^p``) and ``int |phi|^p`` factors into 1-D
    integrals. Packets are aggregated as if disjoint:
    ``||b||_p^p = sum ||packet||_p^p``. ``overlap_bound`` is the largest
    share of ``|packet|^p`` outside the cube of half-width half the
    distance to the nearest other center or periodic image; above ``tol``
    an :class:`AggregationError` is raised. The ``c_n`` path multiplies by
    the supremum of ``|(xi_2 - xi_1)/xi_2|`` on each packet's support.
    """
    p = float(p)
    if not 1.0 <= p <= 3.0:
        raise ConfigurationError(f"p must lie in [1, 3], got {p}")
    prof = profiles or ProfileLibrary(cfg.kappa)
    i1, i3 = prof.integrals(p)
    mp = sine_power_mean(p)
    box = 2.0 * math.pi * cfg.box_L
    atoms = atom_specs(cfg)
    rows = []
    worst = 0.0
    for i, at in enumerate(atoms):
        d1, d2, d3 = at.envelope
        norm_p = at.amplitude ** p * mp * i1 * i1 * i3 / (d1 * d2 * d3)
        half = np.full(3, box / 2.0)
        for j, other in enumerate(atoms):
            if j != i:
                half = np.minimum(half, _torus_sep(at.center, other.center, box).max() / 2.0)
        inside = 1.0
        for ax, d in enumerate(at.envelope):
            inside *= prof.inner_fraction(p, d * half[ax])
        leak = 1.0 - inside
        worst = max(worst, leak)
        w = at.carrier_freq / math.sqrt(2.0)
        spread = prof.support * max(d1, d2)
        msup = 2.0 * spread / (w - spread)
        rows.append({"k": at.k, "norm": norm_p ** (1.0 / p), "overlap": leak,
                     "c_multiplier_sup": msup})
    if worst > tol:
        raise AggregationError(
            f"packets overlap: up to {worst:.3g} of |packet|^p lies outside its cell")
    agg = sum(r["norm"] ** p for r in rows) ** (1.0 / p)
    c_est = sum((r["c_multiplier_sup"] * r["norm"]) ** p for r in rows) ** (1.0 / p)
    return {"p": p, "atoms": rows, "aggregate": agg, "overlap_bound": worst,
            "c_estimate": c_est}


# ---------------------------------------------------------------------------
# Navier-Stokes iterates and the sweep
# ---------------------------------------------------------------------------
def ns_picard_half(grid, gh, mu=1.0, tol=1e-12, max_iter=30):
    """Solve ``u = g + N(u, u)`` by fixed-point iteration on half spectra."""
    u = gh.copy()
    ng = math.sqrt(_energy_half(grid, gh)) or 1.0
    for it in range(1, max_iter + 1):
        new = gh + ns_bilinear_half(grid, u, mu)
        d = math.sqrt(_energy_half(grid, new - u)) / ng
        u = new
        if d <= tol:
            return u, it
    raise ConfigurationError(f"Navier-Stokes iteration stalled (update {d:.2e})")


def inflation_row(cfg, picard=True):
    """Evaluate one sweep row; infeasible configurations give ``feasible=False``."""
    t0 = time.perf_counter()
    row = {"n": cfg.n, "epsilon": cfg.epsilon, "r": cfg.r, "grid_N": cfg.grid_N,
           "recenter_shift": cfg.shift, "block_rule": cfg.block_set_rule,
           "kappa": cfg.kappa, "n_atoms": len(cfg.scales),
           "designated_block": cfg.designated_block,
           "adaptations": ";".join(cfg.adaptations()), "feasible": False, "reason": ""}
    grid = cfg.grid()
    try:
        bh, ch, gh = gn_half(cfg, grid)
    except (SynthesisError, ConfigurationError) as exc:
        row["reason"] = str(exc)
        return row
    del bh, ch
    r, mu = cfg.r, cfg.mu
    row["div_defect"] = divergence_defect_half(grid, gh)
    row["localization"] = localization(grid, gh, cfg.designated_block)
    row["norm_g_B031"] = besov_norm_half(grid, gh, 0.0, 3.0, 1.0)
    fh = gh * (_half_sq(grid) * mu)
    row["norm_f_Bm231"] = besov_norm_half(grid, fh, -2.0, 3.0, 1.0)
    del fh
    row["seminorm_gn"] = seminorm_block_half(grid, gh, cfg.blocks, r)
    Gh = ns_bilinear_half(grid, gh, mu)
    row["seminorm_Gn"] = seminorm_block_half(grid, Gh, cfg.blocks, r)
    row["norm_Gn_B031"] = besov_norm_half(grid, Gh, 0.0, 3.0, 1.0)
    if picard:
        u, its = ns_picard_half(grid, gh, mu)
        u -= gh
        u -= Gh
        row["seminorm_Un"] = seminorm_block_half(grid, u, cfg.blocks, r)
        row["picard_iterations"] = its
    row["feasible"] = True
    row["wall_time"] = time.perf_counter() - t0
    return row


def inflation_sweep(configs, picard=True):
    """Rows for each config in ``n`` order; infeasible rows do not stop the sweep."""
    rows = [inflation_row(c, picard) for c in sorted(configs, key=lambda c: c.n)]
    return rows


def sweep_trends(rows):
    """Monotonicity of the data norm and non-degeneration of the output seminorm."""
    ok = [r for r in rows if r["feasible"]]
    g = [r["norm_g_B031"] for r in ok]
    G = [r["seminorm_Gn"] for r in ok]
    return {
        "data_norm_decreasing": bool(all(b < a for a, b in zip(g, g[1:]))),
        "output_ratio_min": float(min(x / G[0] for x in G)) if G else float("nan"),
    }


def write_sweep(rows, csv_path, manifest_path=None, configs=None, extra=None):
    """CSV with the contract columns first, then diagnostics; optional JSON manifest."""
    cols = list(SWEEP_COLUMNS) + list(EXTRA_COLUMNS)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt_cell(r.get(c, "")) for c in cols})
    if manifest_path:
        data = {"configs": [c.to_dict() for c in configs or []], "rows": rows,
                "trends": sweep_trends(rows)}
        data.update(extra or {})
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, default=str)


def _fmt_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


__all__ = [
    "AggregationError", "AtomSpec", "InflationConfig", "ProfileLibrary", "atom_specs",
    "check_feasible", "compute_Gn", "inflation_row", "inflation_sweep", "ns_bilinear",
    "seminorm_block", "semianalytic_atom_norms", "synthesize_bn", "synthesize_cn",
    "synthesize_gn", "sweep_trends", "write_sweep",
]
