import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hallspec import hall_mhd as H
from hallspec import spectral as S
from hallspec.errors import (ConfigurationError, ContractionPreconditionError,
                             NonConvergenceError, ParameterError)
from hallspec.fields import SpectralVectorField
from hallspec.grid import Grid

P111 = H.PhysicalParams(1.0, 1.0, 1.0)
P_MIXED = H.PhysicalParams(1.0, 2.0, 0.5)


def band_vector(grid, rng, band, div_free=True):
    return S.random_field(grid, rng, vector=True, band=band, divergence_free=div_free)


def random_state(grid, rng, band=5, scale=1.0):
    """State with an independent J (not the curl of B)."""
    u, B, J = (band_vector(grid, rng, band) for _ in range(3))
    return H.HallState.from_fields(u, B, J) * scale


# -- independent oracle: explicit symbols and products on a doubled grid ----
def _symbols(grid):
    k = np.fft.fftfreq(grid.N, 1.0 / grid.N)
    k[grid.N // 2] = 0.0
    xi = k / grid.L
    x1, x2, x3 = np.meshgrid(xi, xi, xi, indexing="ij")
    xs = x1 ** 2 + x2 ** 2 + x3 ** 2
    inv = np.where(xs > 0, 1.0 / np.where(xs > 0, xs, 1.0), 0.0)
    return np.stack([x1, x2, x3]), inv


def _samples(c, M):
    N = c.shape[-1]
    idx = np.fft.fftfreq(N, 1.0 / N).astype(int) % M
    big = np.zeros(c.shape[:-3] + (M,) * 3, complex)
    big[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]] = c
    return np.fft.ifftn(big, axes=(-3, -2, -1)).real * M ** 3


def _coeffs(phys, N):
    M = phys.shape[-1]
    big = np.fft.fftn(phys, axes=(-3, -2, -1)) / M ** 3
    idx = np.fft.fftfreq(N, 1.0 / N).astype(int) % M
    out = big[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]]
    out[..., N // 2, :, :] = 0
    out[..., :, N // 2, :] = 0
    out[..., :, :, N // 2] = 0
    return out


def oracle_N(grid, a, b, prm):
    xi, inv = _symbols(grid)
    M = 2 * grid.N

    def curl(c):
        return 1j * np.stack([xi[1] * c[2] - xi[2] * c[1], xi[2] * c[0] - xi[0] * c[2],
                              xi[0] * c[1] - xi[1] * c[0]])

    def leray(c):
        d = np.sum(xi * c, axis=0) * inv
        return c - xi * d

    ua, Ba, Ja = _samples(a[0:3], M), _samples(a[3:6], M), _samples(a[6:9], M)
    ub, Bb = _samples(b[0:3], M), _samples(b[3:6], M)
    betab = _samples(curl(b[6:9]) * inv, M)
    wa = ua - prm.hall * Ja
    T = _coeffs(-ua[:, None] * ub[None, :] + Ba[:, None] * Bb[None, :], grid.N)
    divT = 1j * np.einsum("kxyz,jkxyz->jxyz", xi, T)
    n1 = leray(divT) * inv / prm.mu
    n2 = curl(_coeffs(np.cross(wa, Bb, axis=0), grid.N)) * inv / prm.nu
    n3 = curl(curl(_coeffs(np.cross(wa, betab, axis=0), grid.N))) * inv / prm.nu
    return np.concatenate([n1, n2, n3])


def rel(a, b):
    return float(np.linalg.norm((a - b).ravel()) / np.linalg.norm(b.ravel()))


class TestParams:
    def test_valid(self):
        p = H.PhysicalParams(2, 3, 0)
        assert (p.mu, p.nu, p.hall) == (2.0, 3.0, 0.0)

    @pytest.mark.parametrize("kw", [{"mu": 0}, {"nu": -1}, {"hall": -0.1},
                                    {"mu": float("nan")}, {"nu": "x"}])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            H.PhysicalParams(**kw)


class TestStates:
    def test_current_defaults_to_curl(self, grid32, rng):
        B = band_vector(grid32, rng, 5)
        U = H.HallState.from_fields(band_vector(grid32, rng, 5), B)
        assert U.current_defect() < 1e-15
        assert U.B.allclose(B)

    def test_force_flags(self, grid32, rng):
        f, g = band_vector(grid32, rng, 4), band_vector(grid32, rng, 4)
        F = H.ForceTriple.from_fields(f, g)
        assert F.meta["curl_g_derived"]
        F2 = H.ForceTriple.from_fields(f, g, curl_g_data=S.curl(g) * 2.0)
        assert not F2.meta["curl_g_derived"]
        assert not F.rescale(2).meta["curl_g_derived"]

    def test_shape_validation(self, grid32):
        with pytest.raises(ConfigurationError):
            H.HallState(grid32, np.zeros((6,) + grid32.shape))

    def test_rescale(self, grid32, rng):
        U = random_state(grid32, rng)
        V = U.rescale(2)
        assert V.grid.L == 0.5
        np.testing.assert_array_equal(V.coeffs, 2 * U.coeffs)
        F = H.smooth_forcing(grid32, 3, 1.0)
        np.testing.assert_array_equal(F.rescale(2).coeffs, 8 * F.coeffs)


class TestOperators:
    def test_linear_solve_matches_field_ops(self, grid16, rng):
        f, g = band_vector(grid16, rng, 4, False), band_vector(grid16, rng, 4, False)
        F = H.ForceTriple.from_fields(f, g)
        prm = H.PhysicalParams(0.7, 1.3, 0.4)
        U = H.linear_solve(F, prm)
        ref = S.inverse_neg_laplacian(S.leray_project(f), 0.7)
        assert U.u.allclose(ref, rtol=1e-14)
        ref = S.inverse_neg_laplacian(S.leray_project(S.curl(g)), 1.3)
        assert U.J.allclose(ref, rtol=1e-14)
        assert U.divergence_defect() < 1e-14

    @pytest.mark.parametrize("prm", [P111, P_MIXED, H.PhysicalParams(0.3, 1.7, 0.0)])
    def test_nonlinear_matches_oracle(self, grid32, rng, prm):
        a = random_state(grid32, rng).coeffs
        b = random_state(grid32, rng).coeffs
        got = H.nonlinear_coeffs(grid32, a, b, prm)
        assert rel(got, oracle_N(grid32, a, b, prm)) < 1e-11

    def test_third_part_is_curl_of_second_for_consistent_states(self, grid32, rng):
        U = H.HallState.from_fields(band_vector(grid32, rng, 5), band_vector(grid32, rng, 5))
        N = H.nonlinear_N(U, U, P_MIXED)
        assert N.J.allclose(S.curl(N.B), rtol=1e-12, atol=1e-14 * N.J.max_abs())

    def test_field_level_route(self, grid32, rng):
        U, V = random_state(grid32, rng), random_state(grid32, rng)
        prm = P_MIXED
        w = U.u - U.J * prm.hall
        n3 = S.curl(S.curl(S.cross_product(w, S.biot_savart(V.J))))
        n3 = S.inverse_neg_laplacian(n3, prm.nu)
        assert H.nonlinear_N(U, V, prm).J.allclose(n3, rtol=1e-11)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
    def test_bilinear(self, a, b, seed):
        g = Grid(16)
        rng = np.random.default_rng(seed)
        U, V, W = (random_state(g, rng, band=2) for _ in range(3))
        lhs = H.nonlinear_N(U * a + V * b, W, P111).coeffs
        rhs = a * H.nonlinear_N(U, W, P111).coeffs + b * H.nonlinear_N(V, W, P111).coeffs
        scale = max(1.0, abs(a) + abs(b)) * np.max(np.abs(H.nonlinear_N(U, W, P111).coeffs))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale + 1e-300

    def test_outputs_divergence_free(self, grid32, rng):
        U = random_state(grid32, rng)
        assert H.nonlinear_N(U, U, P111).divergence_defect() < 1e-13


class TestPicard:
    @pytest.mark.parametrize("mode", ["series", "fixed_point"])
    def test_zero_forcing(self, grid32, mode):
        F = H.ForceTriple.zeros(grid32)
        U, rep = H.picard_solve(F, P111, mode=mode)
        assert rep.iterations == 1 and rep.converged
        assert not np.any(U.coeffs)

    @pytest.mark.parametrize("prm", [P111, P_MIXED])
    def test_manufactured_recovery(self, grid32, prm):
        Us, F = H.manufactured_fixture(grid32, prm, amplitude=0.2, band=4)
        U1, r1 = H.picard_solve(F, prm, mode="series", tol=1e-13)
        U2, r2 = H.picard_solve(F, prm, mode="fixed_point", tol=1e-13)
        assert (U1 - Us).norm() / Us.norm() < 1e-12
        assert (U2 - U1).norm() / U1.norm() < 1e-12
        assert r1.monotone and r1.converged
        assert set(r1.besov_norms) == {"u", "B", "J"}

    def test_residuals_small_at_solution(self, grid32):
        Us, F = H.manufactured_fixture(grid32, P_MIXED, amplitude=0.2, band=4)
        res = H.residual(Us, F, P_MIXED)
        for key in ("fixed_point_u", "fixed_point_B", "fixed_point_J", "momentum",
                    "induction", "current_defect"):
            assert res[key] < 1e-13, key

    def test_residual_linear_in_perturbation(self, grid32, rng):
        Us, F = H.manufactured_fixture(grid32, P111, amplitude=0.2, band=4)
        w = random_state(grid32, rng, band=4)
        r = [H.residual(Us + w * e, F, P111)["fixed_point_u"] for e in (1e-4, 1e-5, 1e-6)]
        assert r[0] / r[1] == pytest.approx(10, rel=1e-2)
        assert r[1] / r[2] == pytest.approx(10, rel=1e-2)

    def test_divergence_raises_with_report(self, grid32):
        F = H.smooth_forcing(grid32, 3, 1e4)
        with pytest.raises(NonConvergenceError) as exc:
            H.picard_solve(F, P111, mode="series", max_m=30)
        rep = exc.value.report
        assert rep is not None and not rep.converged
        tail = rep.series_norms[-H.DIVERGENCE_WINDOW - 1:]
        assert all(b > a for a, b in zip(tail, tail[1:]))

    def test_budget_exhausted(self, grid32):
        F = H.smooth_forcing(grid32, 3, 1.0)
        with pytest.raises(NonConvergenceError):
            H.picard_solve(F, P111, tol=1e-30, max_m=3)

    def test_unknown_mode(self, grid32):
        with pytest.raises(ConfigurationError):
            H.picard_solve(H.ForceTriple.zeros(grid32), P111, mode="newton")

    def test_series_terms_homogeneity(self, grid32):
        F = H.smooth_forcing(grid32, 3, 1.0)
        a = H.series_norms(F, P111, 4)
        b = H.series_norms(F * 0.5, P111, 4)
        for m in range(4):
            assert b[m] / a[m] == pytest.approx(0.5 ** (m + 1), rel=1e-10)

    def test_scaling_commutes(self, grid32):
        Us, F = H.manufactured_fixture(grid32, P_MIXED, amplitude=0.3, band=4)
        U, _ = H.picard_solve(F, P_MIXED, tol=1e-14)
        V, _ = H.picard_solve(F.rescale(2), P_MIXED, tol=1e-14)
        assert (V - U.rescale(2)).norm() <= 1e-12 * V.norm()

    def test_lipschitz_audit(self, grid32, rng):
        F = H.smooth_forcing(grid32, 3, 1.0)
        dF = H.smooth_forcing(grid32, 3, 1.0, seed=7)
        out = H.lipschitz_audit(F, dF, P111)
        ratios = [o["ratio"] for o in out]
        assert max(ratios) / min(ratios) < 1.2


class TestShapeCheck:
    def test_geometric(self):
        out = H.series_shape_check([0.3 ** m for m in range(1, 11)])
        assert out["passed"] and out["fit_residual"] < 1e-12
        assert out["slope"] == pytest.approx(math.log(0.3))

    def test_concave(self):
        out = H.series_shape_check([math.exp(-m * m) for m in range(1, 11)])
        assert out["concave"] and out["passed"]

    def test_rejects_kink(self):
        y = [1.0] * 5 + [1e-8] * 5
        assert not H.series_shape_check(y)["passed"]


class TestDiagnostics:
    def test_pressure_of_gradient_forcing(self, grid32, rng):
        phi = S.random_field(grid32, rng, band=6)
        zero = SpectralVectorField.zeros(grid32)
        p = H.pressure(zero, zero, S.gradient(phi))
        assert p.allclose(phi, rtol=1e-13)

    @pytest.mark.parametrize("prm", [P111, P_MIXED])
    def test_v_equation(self, grid32, prm):
        Us, F = H.manufactured_fixture(grid32, prm, amplitude=0.3, band=4)
        out = H.v_field_diagnostics(Us, F, prm)
        assert out["relative_residual"] < 1e-13
        assert set(out["terms"]) >= {"hall_transport", "stretching", "minus_grad_q"}

    def test_cancellations(self, grid32, rng):
        B = band_vector(grid32, rng, 5)
        v = band_vector(grid32, rng, 5)
        for val in H.cancellation_check(B, v).values():
            assert val < 1e-13

    def test_cancellations_fail_for_generic_pairing(self, grid32, rng):
        B = band_vector(grid32, rng, 5)
        lor = S.cross_product(S.curl(B), B)
        other = band_vector(grid32, rng, 5)
        val = abs(H._inner(lor.mean_free(), other)) / (H._l2(lor.mean_free()) * H._l2(other))
        assert val > 1e-6


class TestFriedrichs:
    def test_precondition(self, grid32):
        F = H.smooth_forcing(grid32, 3, 1e3)
        with pytest.raises(ContractionPreconditionError) as exc:
            H.friedrichs_solve(F, P111, 8)
        assert exc.value.report.extra["contraction_number"] >= 1

    def test_cutoff_below_lattice(self, grid32):
        with pytest.raises(ConfigurationError):
            H.friedrichs_solve(H.smooth_forcing(grid32, 3, 1.0), P111, 0.5)

    def test_solution_properties(self, grid32):
        F = H.smooth_forcing(grid32, 3, 0.05)
        U, rep = H.friedrichs_solve(F, P111, 4, r=1, delta=1.0)
        ex = rep.extra
        assert ex["l2_bound_holds"] and ex["truncation_defect"] == 0.0
        assert ex["uniform_bound"] < 2.0 and ex["uniform_bound_holds"]
        assert U.divergence_defect() < 1e-13

    def test_matches_picard_with_full_band(self, grid32):
        F = H.smooth_forcing(grid32, 3, 0.05)
        V, _ = H.friedrichs_solve(F, P_MIXED, 32)
        U, _ = H.picard_solve(F, P_MIXED, tol=1e-14)
        assert rel(V.coeffs[:6], U.coeffs[:6]) < 1e-12

    def test_delta_warning(self, grid32):
        F = H.smooth_forcing(grid32, 3, 0.05)
        with pytest.warns(UserWarning):
            _, rep = H.friedrichs_solve(F, P111, 4, delta=1e-3)
        assert rep.extra["delta_violated"]

    def test_constant_estimate_is_positive_and_scales(self, grid32):
        k1 = H.estimate_bilinear_constant(grid32, H.PhysicalParams(1, 1, 0), 4)
        k2 = H.estimate_bilinear_constant(grid32, H.PhysicalParams(2, 2, 0), 4)
        assert k1 > 0 and k2 == pytest.approx(k1 / 2, rel=1e-12)

    def test_calibrate_delta_orders(self, grid32):
        F = H.smooth_forcing(grid32, 3, 1.0)
        d, amp = H.calibrate_delta(F, P111, lo=1e-2, hi=1e3, steps=5, max_iter=25)
        assert d == pytest.approx(amp, rel=1e-12)
        U, _ = H.picard_solve(F * amp, P111, mode="fixed_point", tol=1e-8, max_m=25)
        with pytest.raises(NonConvergenceError):
            H.picard_solve(F * (amp * 10), P111, mode="fixed_point", tol=1e-8, max_m=25)
