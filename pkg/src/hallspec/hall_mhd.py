"""Steady incompressible Hall-MHD on the periodic box.

The unknown is the triple ``U = (u, B, J)`` where ``J`` plays the role of
``curl B`` but is carried as an independent field so that the solution map
is a fixed point of

    U = L F + N(U, U),
    L F = ((-mu Lap)^{-1} P f, (-nu Lap)^{-1} P g, (-nu Lap)^{-1} P h),
    N1 = (-mu Lap)^{-1} P div(-u (x) u + B (x) B),
    N2 = (-nu Lap)^{-1} curl((u - hall J) x B),
    N3 = (-nu Lap)^{-1} curl curl((u - hall J) x curl^{-1} J),

with ``h = curl g`` for physical data. Two solvers are provided: the
power series ``U = sum_m A_m`` with ``A_1 = L F`` and
``A_m = sum_{k+l=m} N(A_k, A_l)``, and the plain fixed-point iteration.
A Friedrichs-truncated solver for ``(u, B)`` works in ``L^2`` on the
annulus ``1/n <= |xi| <= n``.

All products are dealiased with the grid's rule; the hot loops work on raw
coefficient stacks of shape ``(9, N, N, N)``.
"""
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from . import spectral as S
from .errors import (ConfigurationError, ContractionPreconditionError,
                     NonConvergenceError, ParameterError)
from .fields import SpectralField, SpectralVectorField
from .littlewood_paley import BesovIndex, besov_norm_coeffs, build_partition

DEFAULT_NORM = BesovIndex(0.5, 2, 2)
DEFAULT_REPORT_INDICES = (
    BesovIndex(0.5, 2, 1), BesovIndex(0.5, 2, 2), BesovIndex(0.5, 2, math.inf),
    BesovIndex(1.0, 1.5, 1), BesovIndex(1.0, 1.5, 2),
)
DIVERGENCE_WINDOW = 3


# ---------------------------------------------------------------------------
# parameters, states and data
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity ``mu``, resistivity ``nu`` and Hall coefficient ``hall``."""

    mu: float = 1.0
    nu: float = 1.0
    hall: float = 1.0

    def __post_init__(self):
        for name in ("mu", "nu", "hall"):
            val = getattr(self, name)
            try:
                val = float(val)
            except (TypeError, ValueError):
                raise ParameterError(f"{name} must be a real number, got {val!r}") from None
            if not math.isfinite(val):
                raise ParameterError(f"{name} must be finite, got {val}")
            object.__setattr__(self, name, val)
        if self.mu <= 0 or self.nu <= 0:
            raise ParameterError(f"mu and nu must be positive, got mu={self.mu}, nu={self.nu}")
        if self.hall < 0:
            raise ParameterError(f"the Hall coefficient must be nonnegative, got {self.hall}")


def _as_index(idx):
    return idx if isinstance(idx, BesovIndex) else BesovIndex(*idx)


def _stack_norm(grid, coeffs, idx):
    return besov_norm_coeffs(build_partition(grid), coeffs, _as_index(idx))


class _Stack:
    """Shared behaviour of 9-component coefficient stacks."""

    names = ()

    def __init__(self, grid, coeffs, meta=None):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (9,) + grid.shape:
            raise ConfigurationError(
                f"expected a (9, N, N, N) stack for N={grid.N}, got {coeffs.shape}")
        coeffs = np.array(coeffs, dtype=np.complex128)
        coeffs[:, 0, 0, 0] = 0.0
        coeffs.setflags(write=False)
        self.grid = grid
        self.coeffs = coeffs
        self.meta = dict(meta or {})

    def _part(self, i):
        return SpectralVectorField(self.grid, self.coeffs[3 * i:3 * i + 3])

    def __getitem__(self, name):
        return self._part(self.names.index(name))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((9,) + grid.shape, np.complex128))

    def _check(self, other):
        if type(other) is not type(self) or other.grid != self.grid:
            raise ConfigurationError("operands live on different grids or types")

    def __add__(self, other):
        self._check(other)
        meta = {k: v for k, v in self.meta.items() if other.meta.get(k) == v}
        return type(self)(self.grid, self.coeffs + other.coeffs, meta)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return type(self)(self.grid, self.coeffs * float(scalar), self.meta)

    __rmul__ = __mul__

    def norm(self, idx=DEFAULT_NORM):
        """Besov norm of the stacked 9-component field."""
        return _stack_norm(self.grid, self.coeffs, idx)

    def component_norms(self, idx=DEFAULT_NORM):
        return {name: besov_norm_coeffs(build_partition(self.grid),
                                        self.coeffs[3 * i:3 * i + 3], _as_index(idx))
                for i, name in enumerate(self.names)}

    def l2_norm(self):
        c = self.coeffs
        return float(np.sqrt(self.grid.volume * np.sum(c.real ** 2 + c.imag ** 2)))

    def divergence_defect(self):
        """Max ``|xi . c| / max |c|`` over the three parts."""
        out = 0.0
        for i in range(3):
            out = max(out, self._part(i).divergence_defect())
        return out

    def rescaled(self, lam, power):
        """Coefficients times ``lam**power`` on the box shrunk by ``lam``."""
        lam = float(lam)
        if not lam > 0:
            raise ParameterError(f"scale factor must be positive, got {lam}")
        return type(self)(self.grid.with_box(self.grid.L / lam), self.coeffs * lam ** power)


class HallState(_Stack):
    """Velocity ``u``, magnetic field ``B`` and current ``J`` as one stack."""

    names = ("u", "B", "J")

    @classmethod
    def from_fields(cls, u, B, J=None, meta=None):
        """Assemble a state; ``J`` defaults to ``curl B``."""
        if J is None:
            J = S.curl(B)
        for f in (u, B, J):
            if not isinstance(f, SpectralVectorField) or f.grid != u.grid:
                raise ConfigurationError("u, B, J must be vector fields on one grid")
        return cls(u.grid, np.concatenate([u.coeffs, B.coeffs, J.coeffs]), meta)

    @property
    def u(self):
        return self._part(0)

    @property
    def B(self):
        return self._part(1)

    @property
    def J(self):
        return self._part(2)

    def v(self, params):
        """The combined unknown ``u - hall curl B``."""
        return self.u - S.curl(self.B) * params.hall

    def current_defect(self):
        """``||J - curl B||_{L^2} / ||J||_{L^2}`` (zero for a consistent state)."""
        d = (self.J - S.curl(self.B)).l2_coeff_norm()
        n = self.J.l2_coeff_norm()
        return d / n if n else d

    def rescale(self, lam):
        """The state ``lam U(lam x)``."""
        return self.rescaled(lam, 1)


class ForceTriple(_Stack):
    """Forcing ``(f, g, h)``; ``h`` is ``curl g`` unless supplied independently.

    ``meta['curl_g_derived']`` records whether ``h`` was computed from ``g``.
    """

    names = ("f", "g", "h")

    def __init__(self, grid, coeffs, meta=None):
        super().__init__(grid, coeffs, meta)
        self.meta.setdefault("curl_g_derived", False)

    @classmethod
    def from_fields(cls, f, g, curl_g_data=None):
        derived = curl_g_data is None
        h = S.curl(g) if derived else curl_g_data
        for x in (f, g, h):
            if not isinstance(x, SpectralVectorField) or x.grid != f.grid:
                raise ConfigurationError("f, g and curl_g_data must be vector fields on one grid")
            if not x.real:
                raise ConfigurationError("forcing fields must be real")
        return cls(f.grid, np.concatenate([f.coeffs, g.coeffs, h.coeffs]),
                   {"curl_g_derived": derived})

    @property
    def f(self):
        return self._part(0)

    @property
    def g(self):
        return self._part(1)

    @property
    def curl_g_data(self):
        return self._part(2)

    def rescale(self, lam):
        """The data ``lam^3 F(lam x)``; ``h`` is no longer ``curl g`` afterwards."""
        out = self.rescaled(lam, 3)
        out.meta["curl_g_derived"] = False
        return out


@dataclass
class SolveReport:
    """What a solver observed; serializable through :meth:`to_dict`."""

    mode: str
    grid: dict
    params: dict
    tol: float
    norm_index: str
    converged: bool = False
    iterations: int = 0
    series_norms: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    monotone: bool = True
    besov_norms: dict = field(default_factory=dict)
    divergence_defect: float = 0.0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _new_report(mode, grid, params, tol, idx):
    return SolveReport(mode=mode, grid=grid.describe(), params=asdict(params), tol=float(tol),
                       norm_index=str(_as_index(idx)))


def _fill_norms(report, U, indices):
    for idx in indices:
        idx = _as_index(idx)
        for name, val in U.component_norms(idx).items():
            report.besov_norms.setdefault(name, {})[str(idx)] = val
    report.divergence_defect = U.divergence_defect()


# ---------------------------------------------------------------------------
# linear and bilinear maps on raw stacks
# ---------------------------------------------------------------------------

def linear_coeffs(grid, Fc, params):
    inv = grid.inv_xi_sq
    out = np.empty_like(Fc)
    out[0:3] = S.leray_coeffs(grid, Fc[0:3]) * (inv / params.mu)
    out[3:6] = S.leray_coeffs(grid, Fc[3:6]) * (inv / params.nu)
    out[6:9] = S.leray_coeffs(grid, Fc[6:9]) * (inv / params.nu)
    return out


def linear_solve(F, params):
    """``L F``; divergence-free by construction."""
    return HallState(F.grid, linear_coeffs(F.grid, F.coeffs, params))


def _lift(grid, c, params):
    """Physical samples of ``u, B, u - hall J, curl^{-1} J`` as a (12, M, M, M) array."""
    d = S.dealiaser(grid)
    w = c[0:6]
    beta = S.biot_savart_coeffs(grid, c[6:9])
    stack = np.concatenate([w, c[0:3] - params.hall * c[6:9], beta])
    return d.lift(stack).real


def _accumulate(acc, pa, pb):
    """Add the pointwise products of one ordered pair to ``acc = (T, X2, X3)``."""
    T, X2, X3 = acc
    ua, Ba, wa = pa[0:3], pa[3:6], pa[6:9]
    ub, Bb, betab = pb[0:3], pb[3:6], pb[9:12]
    for j in range(3):
        T[j] += Ba[j] * Bb
        T[j] -= ua[j] * ub
    X2 += kernels.cross(wa, Bb)
    X3 += kernels.cross(wa, betab)


def _empty_acc(grid):
    M = S.dealiaser(grid).product_shape
    return (np.zeros((3, 3) + M), np.zeros((3,) + M), np.zeros((3,) + M))


def _close(grid, acc, params):
    """Spectral half of the bilinear map applied to accumulated products."""
    T, X2, X3 = acc
    d = S.dealiaser(grid)
    hat = d.lower(np.concatenate([T.reshape((9,) + T.shape[2:]), X2, X3]))
    inv = grid.inv_xi_sq
    out = np.empty((9,) + grid.shape, np.complex128)
    t = hat[0:9].reshape((3, 3) + grid.shape)
    out[0:3] = S.leray_coeffs(grid, S.tensor_div_coeffs(grid, t)) * (inv / params.mu)
    out[3:6] = S.curl_coeffs(grid, hat[9:12]) * (inv / params.nu)
    out[6:9] = S.curl_coeffs(grid, S.curl_coeffs(grid, hat[12:15])) * (inv / params.nu)
    return out


def nonlinear_coeffs(grid, a, b, params):
    acc = _empty_acc(grid)
    pa = _lift(grid, a, params)
    pb = pa if b is a else _lift(grid, b, params)
    _accumulate(acc, pa, pb)
    return _close(grid, acc, params)


def nonlinear_N(U, V, params):
    """The bilinear map ``N(U, V)``; ``U`` supplies ``u - hall J``, ``V`` the transported fields."""
    U._check(V)
    return HallState(U.grid, nonlinear_coeffs(U.grid, U.coeffs, V.coeffs, params))


def _has_alias_risk(grid, c):
    return S.dealiaser(grid).out_of_band(c) > 1e-14 * (float(np.max(np.abs(c))) or 1.0)


# ---------------------------------------------------------------------------
# Picard solvers
# ---------------------------------------------------------------------------
def series_terms(F, params, m_max, norm_index=DEFAULT_NORM):
    """Yield ``(m, A_m)`` coefficient stacks of the power series, ``m = 1..m_max``.

    Physical samples of every term are kept so each new term costs one
    forward transform batch and one inverse batch.
    """
    grid = F.grid
    A = [None, linear_coeffs(grid, F.coeffs, params)]
    phys = [None, _lift(grid, A[1], params)]
    yield 1, A[1]
    for m in range(2, m_max + 1):
        acc = _empty_acc(grid)
        for k in range(1, m):
            _accumulate(acc, phys[k], phys[m - k])
        A.append(_close(grid, acc, params))
        phys.append(_lift(grid, A[m], params))
        yield m, A[m]


def series_norms(F, params, m_max, norm_index=DEFAULT_NORM):
    """Norms ``||A_m||`` for ``m = 1..m_max`` (no convergence test)."""
    return [_stack_norm(F.grid, a, norm_index) for _, a in series_terms(F, params, m_max)]


def series_shape_check(norms, tol=0.05):
    """Is ``log ||A_m||`` linear within ``tol`` of its range, or concave?

    Returns the fitted slope, the largest deviation from the least-squares
    line relative to the range of the data, and the concavity flag.
    """
    y = np.log(np.asarray(norms, dtype=float))
    m = np.arange(1, len(y) + 1, dtype=float)
    slope, icpt = np.polyfit(m, y, 1)
    span = float(np.ptp(y)) or 1.0
    dev = float(np.max(np.abs(y - (slope * m + icpt)))) / span
    concave = bool(np.all(np.diff(y, 2) <= 0)) if len(y) > 2 else True
    return {"slope": float(slope), "fit_residual": dev, "concave": concave,
            "passed": bool(dev <= tol or concave)}


def _diverging(seq, window=DIVERGENCE_WINDOW):
    if len(seq) <= window:
        return False
    tail = seq[-window - 1:]
    return all(b > a for a, b in zip(tail, tail[1:]))


def picard_solve(F, params, mode="series", tol=1e-12, max_m=50, norm_index=DEFAULT_NORM,
                 report_indices=DEFAULT_REPORT_INDICES):
    """Solve ``U = L F + N(U, U)``.

    ``series`` sums terms until ``||A_m|| <= tol ||sum_{k<=m} A_k||``;
    ``fixed_point`` iterates ``U <- L F + N(U, U)`` until the relative update
    is below ``tol``. Both measure in ``norm_index``. Raises
    :class:`NonConvergenceError` (with the report attached) after
    ``DIVERGENCE_WINDOW`` consecutive increases or when ``max_m`` is reached.
    """
    if mode not in ("series", "fixed_point"):
        raise ConfigurationError(f"unknown solver mode {mode!r}")
    if not tol >= 0 or int(max_m) < 1:
        raise ConfigurationError("tol must be >= 0 and max_m >= 1")
    grid = F.grid
    t0 = time.perf_counter()
    report = _new_report(mode, grid, params, tol, norm_index)
    if _has_alias_risk(grid, F.coeffs):
        report.extra["aliasing_warning"] = "forcing has energy outside the exact product band"

    def fail(msg):
        report.wall_time = time.perf_counter() - t0
        raise NonConvergenceError(msg, report)

    with np.errstate(over="ignore", invalid="ignore"):
        U = _picard_loop(F, params, mode, tol, max_m, norm_index, report, fail)
    seq = report.series_norms if mode == "series" else report.residuals
    report.monotone = bool(all(b <= a for a, b in zip(seq, seq[1:])))
    report.wall_time = time.perf_counter() - t0
    if not report.converged:
        fail(f"no convergence to tol={tol} within {max_m} steps")
    _fill_norms(report, U, report_indices)
    U.meta["report"] = report
    return U, report


def _picard_loop(F, params, mode, tol, max_m, norm_index, report, fail):
    grid = F.grid
    if mode == "series":
        total = np.zeros((9,) + grid.shape, np.complex128)
        for m, a in series_terms(F, params, int(max_m)):
            total += a
            na = _stack_norm(grid, a, norm_index)
            nt = _stack_norm(grid, total, norm_index)
            report.series_norms.append(na)
            report.residuals.append(na / nt if nt else 0.0)
            report.iterations = m
            if not math.isfinite(nt):
                fail(f"series overflowed at m={m}")
            if na <= tol * nt:
                report.converged = True
                break
            if _diverging(report.series_norms):
                fail(f"series terms grew {DIVERGENCE_WINDOW} times in a row at m={m}")
        U = HallState(grid, total)
    else:
        lf = linear_coeffs(grid, F.coeffs, params)
        cur = lf
        for it in range(1, int(max_m) + 1):
            new = lf + nonlinear_coeffs(grid, cur, cur, params)
            nn = _stack_norm(grid, new, norm_index)
            res = _stack_norm(grid, new - cur, norm_index)
            res = res / nn if nn else res
            report.residuals.append(res)
            report.iterations = it
            cur = new
            if not math.isfinite(res):
                fail(f"fixed-point iterate overflowed at iteration {it}")
            if res <= tol:
                report.converged = True
                break
            if _diverging(report.residuals):
                fail(f"fixed-point updates grew {DIVERGENCE_WINDOW} times in a row "
                     f"at iteration {it}")
        U = HallState(grid, cur)
    return U


# ---------------------------------------------------------------------------
# Friedrichs-truncated solver
# ---------------------------------------------------------------------------
class _Truncated:
    """The truncated quadratic map on ``(u, B)`` stacks of shape (6, N, N, N)."""

    def __init__(self, grid, params, n):
        self.grid = grid
        self.params = params
        self.n = float(n)
        if self.n < grid.xi_min * (1 - 1e-12):
            raise ConfigurationError(
                f"cutoff {n} is below the smallest lattice frequency {grid.xi_min}")
        self.mask = S.annulus_mask(grid, 1.0 / self.n, self.n)
        self.dealias = S.dealiaser(grid)

    def data(self, F):
        g, p = self.grid, self.params
        inv = g.inv_xi_sq * self.mask
        out = np.empty((6,) + g.shape, np.complex128)
        out[0:3] = S.leray_coeffs(g, F.coeffs[0:3]) * (inv / p.mu)
        out[3:6] = S.leray_coeffs(g, F.coeffs[3:6]) * (inv / p.nu)
        return out

    def _phys(self, x):
        c = x * self.mask
        w = c[0:3] - self.params.hall * S.curl_coeffs(self.grid, c[3:6])
        return self.dealias.lift(np.concatenate([c, w])).real

    def apply(self, x, y=None):
        """``B(x, y)``; ``x`` supplies the transporting fields."""
        g, p = self.grid, self.params
        px = self._phys(x)
        py = px if y is None else self._phys(y)
        ux, Bx, wx = px[0:3], px[3:6], px[6:9]
        uy, By = py[0:3], py[3:6]
        T = By[:, None] * Bx[None, :] - uy[:, None] * ux[None, :]
        X = kernels.cross(wx, By)
        M = T.shape[2:]
        hat = self.dealias.lower(np.concatenate([T.reshape((9,) + M), X]))
        inv = g.inv_xi_sq * self.mask
        out = np.empty((6,) + g.shape, np.complex128)
        t = hat[0:9].reshape((3, 3) + g.shape)
        out[0:3] = S.leray_coeffs(g, S.tensor_div_coeffs(g, t)) * (inv / p.mu)
        out[3:6] = S.curl_coeffs(g, hat[9:12]) * (inv / p.nu)
        return out

    def l2(self, x):
        return float(np.sqrt(self.grid.volume * np.sum(x.real ** 2 + x.imag ** 2)))

    def random(self, rng):
        g = self.grid
        u = S.random_field(g, rng, vector=True, divergence_free=True).coeffs
        B = S.random_field(g, rng, vector=True, divergence_free=True).coeffs
        x = np.concatenate([u, B]) * self.mask
        return x / self.l2(x)


def estimate_bilinear_constant(grid, params, n, seed=0, restarts=3, iters=8):
    """Lower estimate of ``K = sup ||B(x, y)||_{L^2} / (||x|| ||y||)`` on the cutoff band.

    Runs a normalized power iteration ``x <- B(x, x) / ||B(x, x)||`` from a
    few random starts and also probes independent pairs; the largest ratio
    seen is returned.
    """
    op = _Truncated(grid, params, n)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        x = op.random(rng)
        y = op.random(rng)
        best = max(best, op.l2(op.apply(x, y)), op.l2(op.apply(y, x)))
        for _ in range(iters):
            z = op.apply(x)
            nz = op.l2(z)
            best = max(best, nz)
            if nz == 0:
                break
            x = z / nz
    return best


def data_norm(F, idx):
    """Besov norm of the stacked data ``(f, g, h)``."""
    return F.norm(idx)


def uniform_bound_norm(u, B, params, r):
    """``||(u, B, u - hall curl B)||`` in the homogeneous ``B^{1/2}_{2,r}`` norm."""
    v = u.coeffs - params.hall * S.curl_coeffs(u.grid, B.coeffs)
    stack = np.concatenate([u.coeffs, B.coeffs, v])
    return _stack_norm(u.grid, stack, BesovIndex(0.5, 2, r))


def friedrichs_solve(F, params, n, r=2, tol=1e-12, max_iter=200, delta=None, K=None,
                     seed=0):
    """Solve the truncated system ``x = a + B(x, x)`` on the annulus ``1/n <= |xi| <= n``.

    Checks the contraction precondition ``4 K ||a||_{L^2} < 1`` with an
    estimated ``K`` and raises :class:`ContractionPreconditionError` if it
    fails. Returns the state ``(u, B, curl B)`` and the report, which
    records ``||(u, B, v)||_{B^{1/2}_{2,r}}`` and the data norm
    ``||(f, g, h)||_{B^{-3/2}_{2,r}}`` compared with ``delta``.
    """
    grid = F.grid
    t0 = time.perf_counter()
    op = _Truncated(grid, params, n)
    report = _new_report("friedrichs", grid, params, tol, BesovIndex(0.5, 2, r))
    a = op.data(F)
    na = op.l2(a)
    if K is None:
        K = estimate_bilinear_constant(grid, params, n, seed)
    dn = data_norm(F, BesovIndex(-1.5, 2, r))
    report.extra.update(cutoff=float(n), K_estimate=float(K), data_l2=na,
                        contraction_number=4 * K * na, data_norm=dn,
                        delta=None if delta is None else float(delta))
    if delta is not None and not dn < delta:
        warnings.warn(f"data norm {dn:.3e} is not below delta={delta:.3e}")
        report.extra["delta_violated"] = True
    if not 4 * K * na < 1:
        report.wall_time = time.perf_counter() - t0
        raise ContractionPreconditionError(
            f"4 K ||a|| = {4 * K * na:.3e} >= 1 (K ~ {K:.3e})", report)
    x = a
    for it in range(1, int(max_iter) + 1):
        new = a + op.apply(x)
        res = op.l2(new - x)
        nn = op.l2(new)
        res = res / nn if nn else res
        report.residuals.append(res)
        report.iterations = it
        x = new
        if res <= tol:
            report.converged = True
            break
        if not math.isfinite(res) or _diverging(report.residuals):
            break
    report.wall_time = time.perf_counter() - t0
    if not report.converged:
        raise NonConvergenceError("truncated iteration did not converge", report)
    u = SpectralVectorField(grid, x[0:3])
    B = SpectralVectorField(grid, x[3:6])
    report.extra["solution_l2"] = op.l2(x)
    report.extra["l2_bound_holds"] = bool(op.l2(x) <= 2 * na * (1 + 1e-12))
    report.extra["truncation_defect"] = float(np.max(np.abs(x * ~op.mask)))
    report.extra["uniform_bound"] = uniform_bound_norm(u, B, params, r)
    if delta is not None:
        report.extra["uniform_bound_holds"] = bool(report.extra["uniform_bound"] < 2 * delta)
    report.monotone = bool(all(b <= a_ for a_, b in zip(report.residuals,
                                                        report.residuals[1:])))
    U = HallState.from_fields(u, B)
    _fill_norms(report, U, ())
    return U, report


def calibrate_delta(F, params, r=2, lo=1e-3, hi=10.0, steps=10, tol=1e-8, max_iter=40):
    """Largest data norm (shape of ``F`` rescaled) for which the fixed-point map contracts.

    Bisects the amplitude ``s`` in log scale; ``s`` counts as contracting if
    the fixed-point iteration on ``s F`` converges to ``tol``. Returns
    ``(delta, amplitude)`` with ``delta = ||s F||_{B^{-3/2}_{2,r}}``.
    """

    def ok(s):
        try:
            picard_solve(F * s, params, mode="fixed_point", tol=tol, max_m=max_iter,
                         report_indices=())
            return True
        except NonConvergenceError:
            return False

    if not ok(lo):
        raise NonConvergenceError(f"no contraction even at amplitude {lo}")
    if ok(hi):
        lo = hi
    else:
        for _ in range(int(steps)):
            mid = math.sqrt(lo * hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    return data_norm(F * lo, BesovIndex(-1.5, 2, r)), lo


# ---------------------------------------------------------------------------
# residuals and diagnostics
# ---------------------------------------------------------------------------
def _inner(a, b):
    """``L^2`` pairing of two real fields via Parseval."""
    return float(a.grid.volume * np.sum((np.conj(a.coeffs) * b.coeffs).real))


def _l2(a):
    c = a.coeffs
    return float(np.sqrt(a.grid.volume * np.sum(c.real ** 2 + c.imag ** 2)))


def pressure(u, B, f):
    """Pressure of the momentum equation, ``p = -(-Lap)^{-1} div(f - u.grad u + curl B x B)``."""
    grid = u.grid
    rhs = (f.coeffs - S.tensor_div_coeffs(grid, S.tensor_product(u, u).coeffs)
           + S.cross_product(S.curl(B), B).coeffs)
    return SpectralField(grid, -S.div_coeffs(grid, rhs) * grid.inv_xi_sq)


def residual(U, F, params):
    """Residuals of a computed state.

    ``fixed_point``: per-part ``||U - L F - N(U, U)||_{L^2}`` relative to
    ``||U||``. ``momentum`` and ``induction``: the original equations with
    ``curl B`` in place of ``J`` and the recovered pressure, each relative
    to its largest term.
    """
    grid = U.grid
    R = U.coeffs - linear_coeffs(grid, F.coeffs, params) - nonlinear_coeffs(
        grid, U.coeffs, U.coeffs, params)
    out = {}
    for i, name in enumerate(HallState.names):
        r = float(np.sqrt(grid.volume * np.sum(np.abs(R[3 * i:3 * i + 3]) ** 2)))
        n = float(np.sqrt(grid.volume * np.sum(np.abs(U.coeffs[3 * i:3 * i + 3]) ** 2)))
        out[f"fixed_point_{name}"] = r / n if n else r
    u, B, f, g = U.u, U.B, F.f, F.g
    cB = S.curl(B)
    terms_m = [
        S.laplacian(u) * (-params.mu),
        SpectralVectorField(grid, S.tensor_div_coeffs(grid, S.tensor_product(u, u).coeffs)),
        S.gradient(pressure(u, B, f)),
        -S.cross_product(cB, B),
        -f,
    ]
    w = u - cB * params.hall
    terms_i = [S.laplacian(B) * (-params.nu), -S.curl(S.cross_product(w, B)), -g]
    for name, terms in (("momentum", terms_m), ("induction", terms_i)):
        tot = terms[0].coeffs.copy()
        for t in terms[1:]:
            tot = tot + t.coeffs
        tot[:, 0, 0, 0] = 0.0
        scale = max(_l2(t.mean_free()) for t in terms) or 1.0
        out[name] = float(np.sqrt(grid.volume * np.sum(np.abs(tot) ** 2))) / scale
    out["current_defect"] = U.current_defect()
    out["forcing_mean"] = float(np.max(np.abs(F.coeffs[0:6, 0, 0, 0])))
    return out


def cancellation_check(B, v=None):
    """Normalized pairings that vanish identically.

    ``hall_energy``: ``(curl(curl B x B), B)``; ``lorentz_work``:
    ``(curl B x B, curl B)``; with ``v``: ``v_transport``:
    ``(curl(curl v x B), v)``. Each is divided by the product of the
    ``L^2`` norms of its two arguments.
    """
    cB = S.curl(B)
    lor = S.cross_product(cB, B)
    clor = S.curl(lor)
    out = {}

    def ratio(a, b):
        den = _l2(a.mean_free()) * _l2(b)
        return abs(_inner(a.mean_free(), b)) / den if den else 0.0

    out["hall_energy"] = ratio(clor, B)
    out["lorentz_work"] = ratio(lor, cB)
    if v is not None:
        out["v_transport"] = ratio(S.curl(S.cross_product(S.curl(v), B)), v)
    return out


def v_field_diagnostics(U, F, params):
    """Term-by-term check of the equation satisfied by ``v = u - hall curl B``.

    With ``q`` the pressure of ``-mu Lap u = B.grad B - u.grad u - grad q + f``,

        -nu Lap v = B.grad B - u.grad u - hall curl(curl v x B) + f - hall curl g
                    + curl(v x u) + 2 curl(v.grad curl^{-1}(u - v)) - grad q
                    + (mu - nu) Lap u.

    Returns the norm of every term and the residual relative to the largest.
    """
    grid = U.grid
    u, B, f, g = U.u, U.B, F.f, F.g
    h = params.hall
    v = U.v(params)
    bgb = S.advection(B, B)
    ugu = S.advection(u, u)
    rhs_q = bgb.coeffs - ugu.coeffs + f.coeffs
    q = SpectralField(grid, -S.div_coeffs(grid, rhs_q) * grid.inv_xi_sq)
    beta = S.biot_savart(u - v)
    terms = {
        "B_grad_B": bgb,
        "minus_u_grad_u": -ugu,
        "hall_transport": -S.curl(S.cross_product(S.curl(v), B)) * h,
        "f": f,
        "minus_hall_curl_g": -S.curl(g) * h,
        "curl_v_cross_u": S.curl(S.cross_product(v, u)),
        "stretching": S.curl(S.advection(v, beta)) * 2.0,
        "minus_grad_q": -S.gradient(q),
        "viscosity_gap": S.laplacian(u) * (params.mu - params.nu),
    }
    lhs = S.laplacian(v) * (-params.nu)
    tot = -lhs.coeffs
    for t in terms.values():
        tot = tot + t.coeffs
    tot = tot.copy()
    tot[:, 0, 0, 0] = 0.0
    norms = {k: _l2(t.mean_free()) for k, t in terms.items()}
    norms["lhs"] = _l2(lhs)
    scale = max(norms.values()) or 1.0
    res = float(np.sqrt(grid.volume * np.sum(np.abs(tot) ** 2)))
    return {"terms": norms, "residual": res, "relative_residual": res / scale}


# ---------------------------------------------------------------------------
# fixtures and audits
# ---------------------------------------------------------------------------
def _band_field(grid, rng, band, slope):
    c = S.random_field(grid, rng, vector=True, slope=slope, band=band,
                       divergence_free=True).coeffs
    k = np.sqrt(sum(x.astype(float) ** 2 for x in np.broadcast_arrays(*grid.k_axes())))
    return SpectralVectorField(grid, c * (k <= band))


def manufactured_fixture(grid, params, amplitude=0.05, band=4, seed=0, slope=-1.0):
    """A known smooth state ``U*`` and the data ``F`` that it solves exactly.

    ``u*`` and ``B*`` are random divergence-free fields with lattice
    frequencies ``|k| <= band``, ``J* = curl B*``, scaled so that
    ``||U*||_{B^{1/2}_{2,2}} = amplitude``. The data are
    ``F = (-mu Lap (u* - N1), -nu Lap (B* - N2), -nu Lap (J* - N3))`` so
    that ``h = curl g`` holds up to rounding.
    """
    if 2 * band > grid.band_limit:
        raise ConfigurationError(
            f"band {band} too wide for exact products on N={grid.N}")
    rng = np.random.default_rng(seed)
    u = _band_field(grid, rng, band, slope)
    B = _band_field(grid, rng, band, slope)
    U = HallState.from_fields(u, B)
    U = U * (amplitude / U.norm())
    Nc = nonlinear_coeffs(grid, U.coeffs, U.coeffs, params)
    diff = U.coeffs - Nc
    xs = grid.xi_sq
    Fc = np.concatenate([diff[0:3] * xs * params.mu, diff[3:6] * xs * params.nu,
                         diff[6:9] * xs * params.nu])
    F = ForceTriple(grid, Fc, {"curl_g_derived": False, "manufactured": True})
    return U, F


def lipschitz_audit(F, dF, params, eps=(1e-1, 1e-2, 1e-3), data_index=BesovIndex(-1.5, 2, 2),
                    solution_index=DEFAULT_NORM, tol=1e-13, max_m=80):
    """Empirical ratios ``||S(F + e dF) - S(F)|| / ||e dF||`` of the solution map."""
    U0, _ = picard_solve(F, params, tol=tol, max_m=max_m, report_indices=())
    out = []
    for e in eps:
        U1, _ = picard_solve(F + dF * e, params, tol=tol, max_m=max_m, report_indices=())
        out.append({"eps": float(e),
                    "ratio": (U1 - U0).norm(solution_index) / (dF * e).norm(data_index)})
    return out


def smooth_forcing(grid, band=3, amplitude=1.0, seed=0, slope=-1.0):
    """Random divergence-free ``(f, g, curl g)`` with lattice frequencies ``|k| <= band``.

    Scaled so that ``||(f, g, curl g)||_{B^{-3/2}_{2,2}} = amplitude``.
    """
    rng = np.random.default_rng(seed)
    f = _band_field(grid, rng, band, slope)
    g = _band_field(grid, rng, band, slope)
    F = ForceTriple.from_fields(f, g)
    return F * (amplitude / F.norm(BesovIndex(-1.5, 2, 2)))
