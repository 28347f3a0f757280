"""Periodic box discretization and its frequency lattice.

The box is ``[0, 2*pi*L)^3`` sampled at ``N`` points per axis. A Fourier
coefficient ``c_k`` is the amplitude of ``exp(i k.x / L)``, so the physical
frequency of lattice point ``k`` is ``xi = k / L``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError

DEALIAS_RULES = ("two_thirds", "zero_pad_3halves")

_THREADS = 1


def set_threads(n):
    """Worker count used by every FFT in the package (default 1)."""
    global _THREADS
    n = int(n)
    if n < 1:
        raise ConfigurationError(f"thread count must be positive, got {n}")
    _THREADS = n


def get_threads():
    return _THREADS


def fftn(a, shape_axes=(-3, -2, -1)):
    """Forward transform returning amplitudes (``norm='forward'``)."""
    return sfft.fftn(a, axes=shape_axes, norm="forward", workers=_THREADS)


def ifftn(a, shape_axes=(-3, -2, -1)):
    return sfft.ifftn(a, axes=shape_axes, norm="forward", workers=_THREADS)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``N`` points per axis on a box of scale ``L``."""

    N: int
    L: float = 1.0
    dealias: str = "two_thirds"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        N = self.N
        if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 4 or N & (N - 1):
            raise ConfigurationError(f"N must be a power of two >= 4, got {N!r}")
        object.__setattr__(self, "N", int(N))
        try:
            L = float(self.L)
        except (TypeError, ValueError):
            raise ConfigurationError(f"box scale must be a positive real, got {self.L!r}") from None
        if not np.isfinite(L) or L <= 0:
            raise ConfigurationError(f"box scale must be a positive real, got {self.L!r}")
        object.__setattr__(self, "L", L)
        if self.dealias not in DEALIAS_RULES:
            raise ConfigurationError(
                f"dealias rule must be one of {DEALIAS_RULES}, got {self.dealias!r}")

    # -- basic geometry -------------------------------------------------
    @property
    def shape(self):
        return (self.N, self.N, self.N)

    @property
    def volume(self):
        return (2.0 * np.pi * self.L) ** 3

    @property
    def xi_min(self):
        """Smallest nonzero lattice frequency magnitude."""
        return 1.0 / self.L

    @property
    def nyquist(self):
        return self.N / (2.0 * self.L)

    @property
    def xi_max(self):
        """Largest lattice frequency magnitude (corner of the cube)."""
        return np.sqrt(3.0) * self.nyquist

    @property
    def band_limit(self):
        """Largest integer wavenumber per axis that products resolve exactly."""
        if self.dealias == "two_thirds":
            return (self.N - 1) // 3
        return self.N // 2 - 1

    def with_box(self, L):
        return Grid(self.N, L, self.dealias)

    def with_resolution(self, N):
        return Grid(N, self.L, self.dealias)

    def with_dealias(self, rule):
        return Grid(self.N, self.L, rule)

    # -- lattice arrays (cached, read-only) -----------------------------
    def _cached(self, key, build):
        arr = self._cache.get(key)
        if arr is None:
            arr = build()
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)
            self._cache[key] = arr
        return arr

    @cached_property
    def k1d(self):
        """Integer wavenumbers in FFT order, ``[0, 1, ..., -N/2, ..., -1]``."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        k.setflags(write=False)
        return k

    @cached_property
    def xi1d(self):
        x = self.k1d / self.L
        x.setflags(write=False)
        return x

    @cached_property
    def xi1d_odd(self):
        """1-D frequencies with the Nyquist entry zeroed (odd-derivative symbol)."""
        x = self.xi1d.copy()
        x[self.N // 2] = 0.0
        x.setflags(write=False)
        return x

    def xi_axes(self, odd=False):
        """Broadcastable frequency components ``(xi1, xi2, xi3)``."""
        x = self.xi1d_odd if odd else self.xi1d
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def k_axes(self):
        k = self.k1d
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @property
    def xi_sq(self):
        def build():
            a, b, c = self.xi_axes()
            return a * a + b * b + c * c
        return self._cached("xi_sq", build)

    @property
    def xi_norm(self):
        return self._cached("xi_norm", lambda: np.sqrt(self.xi_sq))

    @property
    def inv_xi_sq(self):
        """``1/|xi|^2`` with the zero mode set to 0."""
        def build():
            s = self.xi_sq.copy()
            s[0, 0, 0] = 1.0
            out = 1.0 / s
            out[0, 0, 0] = 0.0
            return out
        return self._cached("inv_xi_sq", build)

    @property
    def band_mask(self):
        """Boolean mask of modes with ``|k_i| <= band_limit`` on every axis."""
        def build():
            m1 = np.abs(self.k1d) <= self.band_limit
            return m1[:, None, None] & m1[None, :, None] & m1[None, None, :]
        return self._cached("band_mask", build)

    def coordinates(self):
        """Physical sample coordinates ``x_j = 2 pi L j / N`` as broadcastable axes."""
        x = 2.0 * np.pi * self.L * np.arange(self.N) / self.N
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def mesh(self):
        x1, x2, x3 = self.coordinates()
        return np.broadcast_arrays(x1, x2, x3)

    def lattice_index(self, k):
        """Array index of integer wavenumber vector ``k`` (mod N)."""
        return tuple(int(ki) % self.N for ki in k)

    def describe(self):
        return {"N": self.N, "L": self.L, "dealias": self.dealias}
