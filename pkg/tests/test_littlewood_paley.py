import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hallspec import littlewood_paley as LP
from hallspec import spectral as S
from hallspec.errors import ConfigurationError, ParameterError
from hallspec.fields import SpectralField, SpectralVectorField, relative_difference
from hallspec.grid import Grid

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def mode_at(radius, N=32, j_rel=0):
    """Single complex mode (1,0,0) whose frequency magnitude equals ``radius``."""
    g = Grid(N, 1.0 / radius)
    return g, SpectralField.single_mode(g, (1, 0, 0))


class TestProfile:
    def test_annulus_support(self):
        assert LP.partition_phi(0.7) == 0.0
        assert LP.partition_phi(2.7) == 0.0
        r = np.linspace(0, 4, 40001)
        live = r[LP.partition_phi(r) > 0]
        assert live.min() >= 0.75 and live.max() <= 8 / 3

    def test_plateau_and_overlap(self):
        assert LP.partition_phi(1.45) == 1.0
        assert LP.partition_phi(17 / 12) == 1.0
        assert LP.partition_phi(1.0) + LP.partition_phi(2.0) == pytest.approx(1.0, abs=1e-15)

    def test_chi_bounds(self):
        r = np.linspace(0, 2, 2001)
        c = LP.chi(r)
        assert np.all((c >= 0) & (c <= 1))
        assert np.all(np.diff(c) <= 0)
        assert np.all(c[r <= 0.75] == 1) and np.all(c[r >= 4 / 3] == 0)


class TestPartition:
    def test_range(self):
        part = LP.build_partition(Grid(64, 1.0))
        assert part.j_min == -2
        assert part.j_max == math.ceil(math.log2(32 * math.sqrt(3))) + 2
        assert part.telescoping_error < 1e-12

    def test_telescoping_at_unit_frequency(self):
        g = Grid(64)
        part = LP.build_partition(g)
        total = sum(part.weight(j)[1, 0, 0] for j in part.blocks)
        assert total == pytest.approx(1.0, abs=1e-15)

    def test_margin_validation(self):
        with pytest.raises(ConfigurationError):
            LP.DyadicPartition(Grid(16), margin=1)
        with pytest.raises(ConfigurationError):
            LP.DyadicPartition(Grid(4), margin=2)

    def test_non_adjacent_blocks_disjoint(self, rng):
        g = Grid(32, 1.5)
        part = LP.build_partition(g)
        u = S.random_field(g, rng)
        for j in part.blocks:
            for k in part.blocks:
                if abs(j - k) >= 2:
                    assert not LP.delta_j(part, LP.delta_j(part, u, j), k).coeffs.any()

    @settings(max_examples=10, deadline=None)
    @given(seeds, st.sampled_from([0.3, 1.0, 4.0]))
    def test_blocks_sum_to_identity(self, seed, L):
        g = Grid(32, L)
        part = LP.build_partition(g)
        u = S.random_field(g, np.random.default_rng(seed), band=16)
        total = sum(b.coeffs for _, b in LP.decompose(part, u))
        assert relative_difference(total, u.coeffs) < 1e-12

    def test_low_plus_high_is_identity(self, rng):
        g = Grid(32)
        part = LP.build_partition(g)
        u = S.random_field(g, rng, band=16)
        for j in (0, 2, 4):
            high = sum(LP.delta_j(part, u, k).coeffs for k in part.blocks if k >= j)
            assert relative_difference(LP.s_j(part, u, j).coeffs + high, u.coeffs) < 1e-13

    def test_out_of_range_block_is_zero(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        u = S.random_field(g, rng)
        assert not LP.delta_j(part, u, part.j_max + 3).coeffs.any()

    def test_plateau_mode_passes_unchanged(self):
        j = 2
        g, f = mode_at(1.45 * 2**j)
        part = LP.build_partition(g)
        assert np.array_equal(LP.delta_j(part, f, j).coeffs, f.coeffs)
        assert not LP.delta_j(part, f, j + 1).coeffs.any()


class TestBesov:
    def test_zero(self):
        g = Grid(16)
        part = LP.build_partition(g)
        assert LP.besov_norm(part, SpectralField.zeros(g), LP.BesovIndex(0.5, 3, 1)) == 0

    @pytest.mark.parametrize("s,p,r", [(0.5, 2, 2), (-1, 3, 1), (2, math.inf, math.inf)])
    def test_single_block_mode(self, s, p, r):
        j = 3
        g, f = mode_at(1.45 * 2**j)
        part = LP.build_partition(g)
        expected = 2.0 ** (j * s) * (g.volume ** (1 / p) if p != math.inf else 1.0)
        assert LP.besov_norm(part, f, LP.BesovIndex(s, p, r)) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("s,p", [(0.5, 2), (0.0, 3), (-1.5, 2), (1.0, math.inf)])
    def test_dyadic_scaling(self, rng, s, p):
        g = Grid(32, 1.0)
        f = S.random_field(g, rng, band=8)
        halved = SpectralField(g.with_box(0.5), f.coeffs)
        for r in (1, 2, math.inf):
            idx = LP.BesovIndex(s, p, r)
            ratio = (LP.besov_norm(LP.build_partition(halved.grid), halved, idx)
                     / LP.besov_norm(LP.build_partition(g), f, idx))
            assert ratio == pytest.approx(2.0 ** (s - 3 / p), rel=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(seeds, st.sampled_from([-0.5, 0.0, 1.0]), st.sampled_from([2.0, 3.0]))
    def test_monotone_in_r(self, seed, s, p):
        g = Grid(16)
        part = LP.build_partition(g)
        f = S.random_field(g, np.random.default_rng(seed))
        vals = [LP.besov_norm(part, f, LP.BesovIndex(s, p, r)) for r in (1, 1.5, 2, 4, math.inf)]
        assert all(b <= a * (1 + 1e-14) for a, b in zip(vals, vals[1:]))

    def test_embedding_ratio_finite(self, rng):
        g = Grid(32)
        part = LP.build_partition(g)
        ratios = []
        for _ in range(10):
            f = S.random_field(g, rng, slope=rng.uniform(-3, -1))
            hi = LP.besov_norm(part, f, LP.BesovIndex(0.5 - 3 * (1 / 2 - 1 / 4), 4, 2))
            lo = LP.besov_norm(part, f, LP.BesovIndex(0.5, 2, 2))
            ratios.append(hi / lo)
        assert np.all(np.isfinite(ratios)) and max(ratios) < 10

    def test_oversampling_converges_linf(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        f = S.random_field(g, rng)
        idx = LP.BesovIndex(0, math.inf, math.inf)
        coarse = LP.besov_norm(part, f, idx)
        fine = LP.besov_norm(part, f, idx, oversample=4)
        assert fine >= coarse * (1 - 1e-12)
        assert fine == pytest.approx(coarse, rel=0.2)

    def test_vector_norm_is_euclidean(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        v = S.random_field(g, rng, vector=True)
        idx = LP.BesovIndex(0.5, 2, 2)
        comp = [LP.block_lp_norms(part, c, 2) for c in v]
        expected = math.sqrt(sum(2.0 ** (j * 0.5 * 2) * sum(c[j] ** 2 for c in comp)
                                 for j in part.blocks))
        assert LP.besov_norm(part, v, idx) == pytest.approx(expected, rel=1e-12)


class TestTriebelLizorkin:
    def test_zero(self):
        g = Grid(16)
        part = LP.build_partition(g)
        assert LP.triebel_lizorkin_norm(part, SpectralField.zeros(g), (0, 3, 2)) == 0

    def test_single_block_matches_besov(self):
        j = 2
        g, f = mode_at(1.45 * 2**j)
        part = LP.build_partition(g)
        for p, r in ((2, 2), (3, 1), (1.5, math.inf)):
            idx = LP.BesovIndex(0.5, p, r)
            assert LP.triebel_lizorkin_norm(part, f, idx) == pytest.approx(
                LP.besov_norm(part, f, idx), rel=1e-12)

    def test_comparable_to_lebesgue(self, rng):
        g = Grid(32)
        part = LP.build_partition(g)
        ratios = []
        for p in (1.5, 2, 3, 4):
            for _ in range(5):
                f = S.random_field(g, rng, slope=rng.uniform(-3, -1))
                ratios.append(LP.triebel_lizorkin_norm(part, f, (0, p, 2)) / S.lp_norm(f, p))
        C = max(max(ratios), 1 / min(ratios))
        assert C < 3

    def test_p2_r2_equals_l2(self, rng):
        # pointwise l^2 in j then L^2 equals sum_j ||Delta_j u||^2; compare with Besov (2,2)
        g = Grid(16)
        part = LP.build_partition(g)
        f = S.random_field(g, rng)
        assert LP.triebel_lizorkin_norm(part, f, (0, 2, 2)) == pytest.approx(
            LP.besov_norm(part, f, (0, 2, 2)), rel=1e-12)

    def test_p_inf_needs_r_inf(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        f = S.random_field(g, rng)
        with pytest.raises(ParameterError):
            LP.triebel_lizorkin_norm(part, f, (0, math.inf, 2))
        val = LP.triebel_lizorkin_norm(part, f, (0, math.inf, math.inf))
        assert val == pytest.approx(LP.besov_norm(part, f, (0, math.inf, math.inf)), rel=1e-12)


class TestBony:
    def test_zero_paraproduct(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        v = S.random_field(g, rng)
        assert not LP.paraproduct_T(part, SpectralField.zeros(g), v).coeffs.any()

    def test_separated_modes(self):
        g = Grid(64, 1.0)
        part = LP.build_partition(g)
        # |xi| = 1.45 (block 0) and 1.45 * 2**4 ~ 23.2 is not a lattice point; use 20 (block 4)
        u = SpectralField.from_function(g, lambda x, y, z: np.cos(x) + 0 * y + 0 * z)
        v = SpectralField.from_function(g, lambda x, y, z: np.cos(20 * y) + 0 * x + 0 * z)
        uv = S.pointwise_product(u, v)
        T = LP.paraproduct_T(part, u, v)
        assert relative_difference(T, uv) < 1e-14
        assert LP.remainder_R(part, u, v).max_abs() < 1e-14 * uv.max_abs()
        assert LP.paraproduct_T(part, v, u).max_abs() < 1e-14 * uv.max_abs()

    @pytest.mark.parametrize("N", [32, 64])
    def test_identity(self, rng, N):
        g = Grid(N, 1.3)
        part = LP.build_partition(g)
        u = S.random_field(g, rng)
        v = S.random_field(g, rng)
        uv = S.pointwise_product(u, v)
        rest = (LP.paraproduct_T(part, u, v).coeffs + LP.paraproduct_T(part, v, u).coeffs
                + LP.remainder_R(part, u, v).coeffs)
        residual = S.lp_norm(SpectralField(g, uv.coeffs - rest, keep_mean=True), 2)
        assert residual <= 1e-10 * S.lp_norm(u, 2) * S.lp_norm(v, 2)
        assert relative_difference(uv.coeffs, rest) <= 1e-12

    def test_identity_vector_cross(self, rng):
        g = Grid(32)
        part = LP.build_partition(g)
        u = S.random_field(g, rng, vector=True)
        v = S.random_field(g, rng, vector=True)
        rest = (LP.paraproduct_T(part, u, v).coeffs - LP.paraproduct_T(part, v, u).coeffs
                + LP.remainder_R(part, u, v).coeffs)
        # cross product is antisymmetric, so T_v u enters with a minus sign
        assert relative_difference(S.cross_product(u, v).coeffs, rest) < 1e-12


class TestCommutator:
    def test_zero_b(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        a = S.random_field(g, rng)
        assert not LP.commutator(part, 1, SpectralField.zeros(g), a).coeffs.any()

    def test_low_mode_a(self, rng):
        g = Grid(64)
        part = LP.build_partition(g)
        a = SpectralField.from_function(g, lambda x, y, z: np.sin(x) + 0 * y + 0 * z)
        b = S.random_field(g, rng, band=21)
        j = 4
        expected = LP.delta_j(part, S.pointwise_product(b, a), j)
        assert relative_difference(LP.commutator(part, j, b, a), expected) < 1e-15

    def test_direct_two_term(self, rng):
        g = Grid(32)
        part = LP.build_partition(g)
        a = S.random_field(g, rng)
        b = S.random_field(g, rng)
        blocks = LP.commutator_blocks(part, b, a)
        for j in (0, 2, 3):
            direct = (LP.delta_j(part, S.pointwise_product(b, a), j).coeffs
                      - S.pointwise_product(b, LP.delta_j(part, a, j)).coeffs)
            assert relative_difference(LP.commutator(part, j, b, a).coeffs, direct) < 1e-13
            assert relative_difference(blocks[j], direct) < 1e-13

    def test_vector_cross_form(self, rng):
        g = Grid(16)
        part = LP.build_partition(g)
        a = S.random_field(g, rng, vector=True)
        b = S.random_field(g, rng, vector=True)
        j = 1
        direct = (LP.delta_j(part, S.cross_product(b, a), j).coeffs
                  - S.cross_product(b, LP.delta_j(part, a, j)).coeffs)
        got = LP.commutator(part, j, b, a)
        assert isinstance(got, SpectralVectorField)
        assert relative_difference(got.coeffs, direct) < 1e-13
