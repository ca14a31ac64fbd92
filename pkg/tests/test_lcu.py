import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import jv

from conftest import random_hermitian, random_state, seeds
from hsim.errors import DimensionTooLarge, InvalidParams, ZeroMatrix
from hsim.lcu import (
    NegativeDiagonalWarning,
    bessel_j,
    build_walk,
    compressed_vk,
    lcu_evolve,
    lcu_series,
    prep_state,
    segment_plan,
    sqrt_conj_entry,
    truncation_error_bound,
    truncation_order,
    truncation_order_for_z,
    vk_operator,
    walk_eigen_check,
)
from hsim.matrix import HermitianMatrix
from hsim.oracle import evolution_operator, exact_evolve, state_error


def nonneg_diag_hermitian(rng, n):
    a = random_hermitian(rng, n)
    np.fill_diagonal(a, np.abs(np.diag(a)))
    return a


class TestPrepState:
    def test_one_by_one(self):
        np.testing.assert_allclose(prep_state(np.array([[1.0]]), 0).vector, [1, 0])

    def test_sign_rule(self):
        assert sqrt_conj_entry(-1, 0, 1) == pytest.approx(-1j)
        assert sqrt_conj_entry(-1, 1, 0) == pytest.approx(1j)
        assert sqrt_conj_entry(4, 0, 1) == pytest.approx(2)
        z = sqrt_conj_entry(1j, 0, 1)
        assert z == pytest.approx(np.exp(-1j * math.pi / 4))

    @given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
           st.integers(0, 3), st.integers(0, 3))
    def test_root_identity(self, h, j, k):
        if j == k:
            h = complex(abs(h.real))
        # sqrt(H_jk^*)^* sqrt(H_kj^*) = H_jk, with H_kj = H_jk^*
        prod = np.conj(sqrt_conj_entry(h, j, k)) * sqrt_conj_entry(np.conj(h), k, j)
        assert prod == pytest.approx(h, abs=1e-12)

    def test_negative_diagonal_warns(self):
        h = np.diag([1.0, -1.0])
        with pytest.warns(NegativeDiagonalWarning):
            p = prep_state(h, 1)
        assert p.vector[2] == pytest.approx(1j)

    def test_off_diagonal_negative(self):
        h = np.array([[0.0, -1.0], [-1.0, 0.0]])
        assert prep_state(h, 0).vector[2] == pytest.approx(-1j)
        assert prep_state(h, 1).vector[0] == pytest.approx(1j)

    @given(seeds, st.integers(1, 8))
    def test_unit_norm(self, seed, n):
        a = random_hermitian(np.random.default_rng(seed), n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NegativeDiagonalWarning)
            for j in range(n):
                assert np.linalg.norm(prep_state(a, j).vector) == pytest.approx(1, abs=1e-12)

    def test_four_leaf_walkthrough(self):
        """Level-by-level rotations over a 4-leaf tree end in the prepared state."""
        c = np.array([0.5, 0.25j, 1.0, 0.3 - 0.4j])
        h = np.zeros((4, 4), dtype=complex)
        h[0] = c
        h[:, 0] = c.conj()
        h[0, 0] = c[0]
        lam = np.max(np.sum(np.abs(h), axis=1))
        sigma = np.sum(np.abs(c))
        # root rotation, then one rotation per index bit, tracking the |.>|0> and |.>|1> branches
        flag0 = {(): math.sqrt(sigma)}
        flag1 = {(): math.sqrt(lam - sigma)}
        for level in range(2):
            nxt0, nxt1 = {}, {}
            for prefix, amp in flag0.items():
                lo = sum(abs(c[i]) for i in range(4) if _has_prefix(i, prefix + (0,)))
                hi = sum(abs(c[i]) for i in range(4) if _has_prefix(i, prefix + (1,)))
                nxt0[prefix + (0,)] = amp * math.sqrt(lo / (lo + hi))
                nxt0[prefix + (1,)] = amp * math.sqrt(hi / (lo + hi))
            for prefix, amp in flag1.items():
                nxt1[prefix + (0,)] = nxt1[prefix + (1,)] = amp / math.sqrt(2)
            flag0, flag1 = nxt0, nxt1
        expect = np.zeros(8, dtype=complex)
        for k in range(4):
            bits = ((k >> 1) & 1, k & 1)
            # the final leaf stores the complex entry; its magnitude matches the descent
            assert abs(flag0[bits]) == pytest.approx(math.sqrt(abs(c[k])))
            expect[2 * k] = sqrt_conj_entry(c[k], 0, k)
            expect[2 * k + 1] = flag1[bits]
            assert flag1[bits] == pytest.approx(math.sqrt((lam - sigma) / 4))
        np.testing.assert_allclose(prep_state(h, 0).vector, expect / math.sqrt(lam), atol=1e-15)


def _has_prefix(i, prefix):
    bits = ((i >> 1) & 1, i & 1)
    return bits[: len(prefix)] == prefix


class TestWalk:
    def test_scalar(self):
        w = build_walk(np.array([[1.0]]))
        np.testing.assert_allclose(w.compression(), [[1]], atol=1e-15)

    def test_pauli_x(self):
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        np.testing.assert_allclose(build_walk(x).compression(), x, atol=1e-15)

    @given(seeds, st.integers(1, 6))
    def test_compression_and_unitarity(self, seed, n):
        a = nonneg_diag_hermitian(np.random.default_rng(seed), n)
        w = build_walk(a)
        assert w.dimension == 4 * n * n
        assert np.max(np.abs(w.compression() - a / w.lambda1)) <= 1e-10
        assert np.linalg.norm(w.U.conj().T @ w.U - np.eye(w.dimension)) <= 1e-10
        assert np.linalg.norm(w.T.conj().T @ w.T - np.eye(2 * n)) <= 1e-12
        assert np.max(np.abs(w.flag_leak())) <= 1e-12

    def test_limits(self):
        with pytest.raises(DimensionTooLarge):
            build_walk(np.eye(17))
        with pytest.raises(ZeroMatrix):
            build_walk(np.zeros((2, 2)))


class TestEigen:
    def test_zero_eigenvalue(self):
        chk = walk_eigen_check(np.diag([0.0, 1.0]))
        assert chk.mu_plus[0] == pytest.approx(1) and chk.mu_minus[0] == pytest.approx(-1)
        assert chk.max_residual <= 1e-12

    def test_extreme_eigenvalue(self):
        chk = walk_eigen_check(np.diag([0.0, 1.0]))
        assert chk.mu_plus[1] == pytest.approx(1j)
        assert chk.mu_minus[1] == pytest.approx(-np.exp(-1j * math.pi / 2))

    @given(seeds)
    def test_random_n4(self, seed):
        a = nonneg_diag_hermitian(np.random.default_rng(seed), 4)
        chk = walk_eigen_check(a)
        assert chk.residuals.shape == (4, 2)
        assert chk.max_residual <= 1e-8
        assert np.all(chk.vector_norms > 1e-6)


class TestBessel:
    def test_at_zero(self):
        assert bessel_j(0, 0) == 1
        assert all(bessel_j(m, 0) == 0 for m in (-3, -1, 1, 2))

    def test_normalisation(self):
        assert sum(bessel_j(m, 0.5) for m in range(-40, 41)) == pytest.approx(1, abs=1e-12)

    @given(st.integers(-15, 15), st.floats(-3, 3))
    def test_matches_scipy(self, m, z):
        assert bessel_j(m, z) == pytest.approx(jv(m, z), abs=1e-15, rel=1e-12)

    @given(st.integers(0, 12), st.floats(-0.5, 0.5))
    def test_reflection(self, m, z):
        assert bessel_j(-m, z) == (-1) ** m * bessel_j(m, z)


class TestSeries:
    def test_sum_is_one(self):
        s = lcu_series(0.5, 5)
        assert s.alphas.sum() == pytest.approx(1, abs=1e-15)
        np.testing.assert_array_equal(s.orders, np.arange(-5, 6))

    def test_l1_below_two(self):
        for z in np.linspace(-0.5, 0.5, 100):
            for k in range(2, 12):
                assert lcu_series(z, k).l1 < 2

    def test_order_examples(self):
        # a loose eps is already met at k = ceil(|z|)
        assert truncation_order_for_z(0.5, 1.0, 1.0) == 1
        assert truncation_order_for_z(2.5, 1.0, 10.0) == 3
        eps_grid = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10]
        ks = [truncation_order_for_z(0.5, 1.0, e) for e in eps_grid]
        assert ks == sorted(ks)

    def test_order_from_norms(self):
        h = HermitianMatrix.from_dense([[0, 1], [1, 0]])
        assert truncation_order(0.5, h.norms, 1e-8) == truncation_order_for_z(0.5, 1.0, 1e-8)

    def test_a_posteriori_z_half(self):
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        w = build_walk(x)
        k = truncation_order_for_z(0.5, 1.0, 1e-8)
        err = np.linalg.norm(compressed_vk(w, lcu_series(0.5, k)) - evolution_operator(x, 0.5), 2)
        assert err <= 1e-8

    @pytest.mark.parametrize("seed", range(6))
    def test_truncation_monotone_and_meets_target(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        a = nonneg_diag_hermitian(rng, n)
        w = build_walk(a)
        nb = HermitianMatrix.from_dense(a).norms
        ratio = nb.spectral / nb.induced1
        z = 0.5
        exact = evolution_operator(a / w.lambda1, z)
        errs = [np.linalg.norm(compressed_vk(w, lcu_series(z, k)) - exact, 2) for k in range(1, 12)]
        assert all(b <= a_ * (1 + 1e-9) + 1e-14 for a_, b in zip(errs, errs[1:]))
        for eps in (1e-4, 1e-6, 1e-8, 1e-10):
            k = truncation_order_for_z(z, ratio, eps)
            assert errs[k - 1] <= eps

    def test_full_vk_block_matches_compression(self):
        a = nonneg_diag_hermitian(np.random.default_rng(0), 2)
        w = build_walk(a)
        s = lcu_series(0.5, 4)
        t0 = w.T[:, 0::2]
        np.testing.assert_allclose(t0.conj().T @ vk_operator(w, s) @ t0, compressed_vk(w, s), atol=1e-13)

    def test_bound_is_monotone(self):
        vals = [truncation_error_bound(0.5, 0.7, k) for k in range(0, 15)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_segments(self):
        assert segment_plan(1.2) == pytest.approx([0.5, 0.5, 0.2])
        assert segment_plan(-1.0) == pytest.approx([-0.5, -0.5])
        assert segment_plan(0.0) == []


class TestEvolve:
    def test_t_zero(self):
        psi = random_state(np.random.default_rng(0), 4)
        a = nonneg_diag_hermitian(np.random.default_rng(1), 4)
        np.testing.assert_array_equal(lcu_evolve(a, psi, 0.0, 1e-6).amplitudes, psi)

    def test_diagonal(self):
        d = np.array([0.3, 1.2, 0.0, 2.0])
        psi = random_state(np.random.default_rng(2), 4)
        out = lcu_evolve(np.diag(d), psi, 1.3, 1e-8).amplitudes
        np.testing.assert_allclose(out, np.exp(-1j * d * 1.3) * psi, atol=1e-8)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_n4(self, seed):
        rng = np.random.default_rng(seed)
        a = random_hermitian(rng, 4)
        psi = random_state(rng, 4)
        out, rep = lcu_evolve(a, psi, 1.0, 1e-6, return_report=True)
        assert state_error(out, exact_evolve(a, psi, -1.0).state) <= 1e-6
        assert rep.max_alpha_l1 < 2
        assert all(abs(s.z) <= 0.5 for s in rep.segments)

    def test_plus_sign(self):
        rng = np.random.default_rng(9)
        a = random_hermitian(rng, 3)
        psi = random_state(rng, 3)
        out = lcu_evolve(a, psi, 0.8, 1e-7, sign=1)
        assert state_error(out, exact_evolve(a, psi, 0.8).state) <= 1e-7

    def test_bad_params(self):
        with pytest.raises(InvalidParams):
            lcu_evolve(np.eye(2), [1, 0], 1.0, 0.0)
        with pytest.raises(InvalidParams):
            lcu_evolve(np.eye(2), [1, 0], 1.0, 1e-3, sign=2)
