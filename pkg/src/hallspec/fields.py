"""Immutable Fourier-coefficient containers for scalar, vector and tensor fields."""
import numpy as np

from .errors import ConfigurationError
from .grid import Grid, fftn, ifftn


def _freeze(a):
    # A read-only view: the field adopts the buffer without copying it.
    a = np.ascontiguousarray(a, dtype=np.complex128).view()
    a.setflags(write=False)
    return a


def hermitian_partner(a):
    """Coefficient array evaluated at ``-k`` (index ``-k mod N`` on the last 3 axes)."""
    return np.roll(np.flip(a, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))


def hermitian_defect(a):
    """Max of ``|c(-k) - conj(c(k))|`` relative to max ``|c|``."""
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(hermitian_partner(a) - np.conj(a))) / scale)


class _FieldBase:
    """Shared behaviour; ``rank`` is the number of leading component axes."""

    rank = 0

    def __init__(self, grid, coeffs, real=True, meta=None, keep_mean=False):
        if not isinstance(grid, Grid):
            raise ConfigurationError("grid must be a Grid instance")
        coeffs = np.asarray(coeffs)
        expected = (3,) * self.rank + grid.shape
        if coeffs.shape != expected:
            raise ConfigurationError(
                f"coefficient shape {coeffs.shape} does not match {expected}")
        if not keep_mean and np.any(coeffs[(...,) + (0, 0, 0)] != 0):
            coeffs = np.array(coeffs, dtype=np.complex128)
            coeffs[(...,) + (0, 0, 0)] = 0.0
        self.grid = grid
        self.coeffs = _freeze(coeffs)
        self.real = bool(real)
        self.meta = dict(meta or {})

    # -- construction ----------------------------------------------------
    @classmethod
    def zeros(cls, grid, real=True):
        return cls(grid, np.zeros((3,) * cls.rank + grid.shape, np.complex128), real=real)

    @classmethod
    def from_physical(cls, grid, samples, real=None, keep_mean=False):
        """Forward transform of physical samples; the zero mode is re-zeroed unless kept."""
        samples = np.asarray(samples)
        expected = (3,) * cls.rank + grid.shape
        if samples.shape != expected:
            raise ConfigurationError(
                f"sample shape {samples.shape} does not match grid shape {expected}")
        if real is None:
            real = not np.iscomplexobj(samples)
        c = fftn(samples)
        return cls(grid, c, real=real, keep_mean=keep_mean)

    def to_physical(self):
        """Samples on the grid; real-valued when the reality flag is set."""
        s = ifftn(self.coeffs)
        return s.real.copy() if self.real else s

    # -- algebra -----------------------------------------------------------
    def _like(self, coeffs, real=None, meta=None, keep_mean=None):
        if keep_mean is None:
            keep_mean = self.has_mean
        return type(self)(self.grid, coeffs, self.real if real is None else real,
                          meta, keep_mean=keep_mean)

    @property
    def has_mean(self):
        return bool(np.any(self.coeffs[(...,) + (0, 0, 0)] != 0))

    def mean_free(self):
        return self._like(self.coeffs, keep_mean=False, meta=self.meta)

    def _check(self, other):
        if not isinstance(other, type(self)):
            raise ConfigurationError(f"cannot combine {type(self).__name__} "
                                     f"with {type(other).__name__}")
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return self._like(self.coeffs + other.coeffs, real=self.real and other.real,
                          keep_mean=self.has_mean or other.has_mean)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.coeffs - other.coeffs, real=self.real and other.real,
                          keep_mean=self.has_mean or other.has_mean)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        real = self.real and np.isrealobj(scalar)
        return self._like(self.coeffs * scalar, real=real)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def allclose(self, other, rtol=1e-12, atol=0.0):
        self._check(other)
        return relative_difference(self, other) <= rtol or \
            np.max(np.abs(self.coeffs - other.coeffs)) <= atol

    def hermitian_defect(self):
        return hermitian_defect(self.coeffs)

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs)))

    def l2_coeff_norm(self):
        """Euclidean norm of the coefficient array (no volume factor)."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


class SpectralField(_FieldBase):
    """Scalar field stored as an ``(N, N, N)`` coefficient array."""

    rank = 0

    @classmethod
    def single_mode(cls, grid, k, amplitude=1.0, real=None):
        """The function ``amplitude * exp(i k.x / L)``."""
        c = np.zeros(grid.shape, np.complex128)
        c[grid.lattice_index(k)] = amplitude
        return cls(grid, c, real=False if real is None else real)

    @classmethod
    def from_function(cls, grid, func, keep_mean=False):
        """Sample ``func(x1, x2, x3)`` on the grid and transform."""
        x1, x2, x3 = grid.coordinates()
        vals = np.broadcast_to(func(x1, x2, x3), grid.shape)
        return cls.from_physical(grid, np.array(vals), keep_mean=keep_mean)


class SpectralVectorField(_FieldBase):
    """Three scalar components on one grid, stored as ``(3, N, N, N)``."""

    rank = 1

    def __init__(self, grid, coeffs, real=True, meta=None, keep_mean=False,
                 divergence_free=False):
        super().__init__(grid, coeffs, real, meta, keep_mean)
        self.divergence_free = False
        if divergence_free:
            rel = self.divergence_defect()
            if rel > 1e-12:
                raise ConfigurationError(
                    f"field flagged divergence-free has relative divergence {rel:.3e}")
            self.divergence_free = True

    @classmethod
    def from_components(cls, components, **kw):
        comps = list(components)
        if len(comps) != 3:
            raise ConfigurationError("a vector field needs exactly three components")
        grid = comps[0].grid
        for c in comps[1:]:
            if c.grid != grid:
                raise ConfigurationError("components live on different grids")
        real = all(c.real for c in comps)
        keep = kw.pop("keep_mean", any(c.has_mean for c in comps))
        return cls(grid, np.stack([c.coeffs for c in comps]), real=real,
                   keep_mean=keep, **kw)

    @classmethod
    def from_function(cls, grid, func, keep_mean=False, **kw):
        x1, x2, x3 = grid.coordinates()
        vals = [np.broadcast_to(v, grid.shape) for v in func(x1, x2, x3)]
        return cls.from_physical(grid, np.stack(vals), keep_mean=keep_mean)

    def __getitem__(self, i):
        return SpectralField(self.grid, self.coeffs[i], real=self.real,
                             keep_mean=True)

    def __iter__(self):
        return (self[i] for i in range(3))

    def __len__(self):
        return 3

    def divergence_defect(self):
        """``|div v|`` relative to ``|xi| |v|`` measured in coefficient l2."""
        x1, x2, x3 = self.grid.xi_axes(odd=True)
        c = self.coeffs
        div = x1 * c[0] + x2 * c[1] + x3 * c[2]
        ref = np.sqrt(np.sum(self.grid.xi_sq * np.sum(np.abs(c) ** 2, axis=0)))
        if ref == 0:
            return 0.0
        return float(np.sqrt(np.sum(np.abs(div) ** 2)) / ref)


class SpectralTensorField(_FieldBase):
    """Rank-2 field stored as ``(3, 3, N, N, N)``; entry ``[i, j]`` is a scalar field."""

    rank = 2

    def __getitem__(self, ij):
        i, j = ij
        return SpectralField(self.grid, self.coeffs[i, j], real=self.real, keep_mean=True)


def relative_difference(a, b):
    """``||a - b|| / max(||a||, ||b||)`` on coefficient arrays (0 if both vanish)."""
    ca = a.coeffs if hasattr(a, "coeffs") else np.asarray(a)
    cb = b.coeffs if hasattr(b, "coeffs") else np.asarray(b)
    den = max(np.linalg.norm(ca.ravel()), np.linalg.norm(cb.ravel()))
    if den == 0:
        return 0.0
    return float(np.linalg.norm((ca - cb).ravel()) / den)


def stack_vectors(fields):
    """Concatenate vector fields into one ``(3m, N, N, N)`` coefficient array."""
    return np.concatenate([f.coeffs for f in fields], axis=0)
