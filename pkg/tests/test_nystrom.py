import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian, random_state, seeds
from hsim.errors import InvalidParams, NotPsd, ZeroFrobenius, ZeroTrace
from hsim.generate import hermitian, psd_lowrank
from hsim.matrix import HermitianMatrix, spectral_norm
from hsim.nystrom import (
    SimulationPlan,
    cos_series_coefficients,
    evolve_with_shift,
    general_evolve,
    general_plan,
    general_sample_branches,
    general_sketch,
    general_truncation_order,
    nystrom_psd_evolve,
    psd_plan,
    psd_sample_branches,
    psd_truncation_order,
    sample_general_indices,
    scalar_split_exp,
    sin_series_coefficients,
    taylor_coefficient,
    trace_shift,
    truncated_exponential,
    truncation_bound,
)
from hsim.oracle import evolution_operator, exact_evolve, state_error
from hsim.sampling import seeded_rng


def low_rank_psd(rng, n, r, trace=1.0):
    return psd_lowrank(n, r, rng, trace=trace)


class TestPsdPlan:
    def test_k_formula(self):
        for eps in (0.5, 1e-3, 1e-8):
            assert psd_truncation_order(1, 1, eps) == math.ceil(math.e + math.log(2 / eps))
        assert psd_truncation_order(1, 1, 2) == 3

    def test_m_branches(self):
        a, b = psd_sample_branches(1, 1, 0.5, 0.5)
        assert a == 405
        assert b == pytest.approx(144 * math.log(144))
        assert math.ceil(max(a, b)) == 716

    def test_plan_records_cap(self):
        h = low_rank_psd(np.random.default_rng(0), 16, 2)
        plan = psd_plan(h, 1, 0.5, 0.5)
        assert plan.m_required == pytest.approx(144 * math.log(144))
        assert plan.M == 16 and plan.m_capped
        assert plan.m_branches[0] == pytest.approx(405)

    @given(st.floats(0.01, 5), st.floats(0.1, 5))
    def test_k_floor(self, t, norm):
        assert psd_truncation_order(t, norm, 1.0) >= math.ceil(math.e * t * norm)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPsd):
            psd_plan(HermitianMatrix.from_dense(np.diag([1.0, -1.0])), 1, 0.1, 0.1)

    def test_rejects_bad_tolerances(self):
        h = HermitianMatrix.from_dense(np.eye(2))
        for args in [(0, 0.1, 0.1), (1, 0, 0.1), (1, 0.1, 1.5), (1, 2, 0.1)]:
            with pytest.raises(InvalidParams):
                psd_plan(h, *args)

    def test_plan_validation(self):
        with pytest.raises(InvalidParams):
            SimulationPlan(1, 0.1, 0.1, K=0, M=3)
        p = SimulationPlan(1, 0.1, 0.1, K=2, M=3)
        assert p.with_m(5).M == 5 and p.with_seed(9).seed == 9


class TestGeneralPlan:
    def test_prefactor(self):
        pre, _ = general_sample_branches(1, 1, 1, 1, 4 / math.e)
        assert pre == pytest.approx(512)
        _, logf = general_sample_branches(1, 1, 1, 1, 4 / math.e)
        assert logf == pytest.approx(1)

    def test_t_doubling(self):
        h = hermitian(8, np.random.default_rng(0))
        for t in (0.1, 0.5, 1.0, 2.0):
            assert general_plan(h, 2 * t, 0.1, 0.1).m_required >= 16 * general_plan(h, t, 0.1, 0.1).m_required

    @pytest.mark.parametrize("eps", [0.5, 0.1, 1e-4])
    def test_k_small_t(self, eps):
        assert general_truncation_order(1e-12, 1, eps) == math.ceil(math.log(4 / eps))


class TestTruncation:
    def test_examples(self):
        assert truncation_bound(1, 1, 1) == pytest.approx(0.5)
        assert truncation_bound(2, 3, 1) == pytest.approx(16 / 24)
        assert truncation_bound(1, 2, 0) == 0

    def test_taylor_coefficient(self):
        for t in (-1.5, 0.3, 2.0):
            for k in range(10):
                assert taylor_coefficient(t, k) == pytest.approx((1j * t) ** k / math.factorial(k), rel=1e-14)

    @given(seeds, st.integers(1, 32), st.integers(1, 12), st.floats(1.0, 4.0))
    def test_upper_bound(self, seed, n, k, scale):
        rng = np.random.default_rng(seed)
        g = random_hermitian(rng, n)
        hhat = g * scale / spectral_norm(g)
        err = spectral_norm(evolution_operator(hhat, 1.0) - truncated_exponential(hhat, 1.0, k))
        assert err <= truncation_bound(1.0, k, scale * (1 + 1e-15))

    @given(seeds, st.integers(1, 12), st.floats(0.1, 2))
    def test_lipschitz(self, seed, n, t):
        rng = np.random.default_rng(seed)
        h = random_hermitian(rng, n)
        hh = h + 0.1 * random_hermitian(rng, n)
        lhs = spectral_norm(evolution_operator(h, t) - evolution_operator(hh, t))
        assert lhs <= t * spectral_norm(h - hh) * (1 + 1e-10) + 1e-13


class TestPsdEvolve:
    @pytest.mark.parametrize("c", [0.3, 1.0, 2.5])
    def test_scalar_identity(self, c):
        n = 8
        h = HermitianMatrix.from_dense(c * np.eye(n))
        psi = random_state(np.random.default_rng(0), n)
        plan = psd_plan(h, 1.0, 1e-3, 0.1)
        out = nystrom_psd_evolve(h, psi, plan)
        assert state_error(out, np.exp(1j * c) * psi) <= truncation_bound(1.0, plan.K, c)

    def test_t_zero_returns_psi(self):
        rng = np.random.default_rng(1)
        h = low_rank_psd(rng, 8, 2)
        psi = random_state(rng, 8)
        plan = SimulationPlan(0.0, 0.1, 0.1, K=5, M=4)
        np.testing.assert_array_equal(nystrom_psd_evolve(h, psi, plan, seeded_rng(0)).amplitudes, psi)

    def test_zero_trace(self):
        h = HermitianMatrix.from_dense(np.zeros((4, 4)))
        with pytest.raises(ZeroTrace):
            nystrom_psd_evolve(h, np.ones(4) / 2, SimulationPlan(1, 0.1, 0.1, K=3, M=2), seeded_rng(0))

    @pytest.mark.parametrize("seed", range(5))
    def test_rank3_full_sampling(self, seed):
        rng = np.random.default_rng(seed)
        h = low_rank_psd(rng, 64, 3)
        psi = random_state(rng, 64)
        plan = psd_plan(h, 1.0, 1e-3, 0.1)
        assert plan.M == 64
        err = state_error(nystrom_psd_evolve(h, psi, plan), exact_evolve(h, psi, 1.0).state)
        assert err <= 1e-3

    def test_model_reconstructs_low_rank(self):
        rng = np.random.default_rng(7)
        h = low_rank_psd(rng, 16, 2)
        psi = random_state(rng, 16)
        plan = psd_plan(h, 1.0, 0.1, 0.1).with_m(6)
        _, model = nystrom_psd_evolve(h, psi, plan, seeded_rng(3), return_model=True)
        assert len(model.indices) == 6
        np.testing.assert_allclose(model.h_hat(), h.dense, atol=1e-10)
        # blockwise accumulation equals the direct products
        np.testing.assert_allclose(model.D, model.B_pinv @ model.A.conj().T @ model.A, atol=1e-12)
        np.testing.assert_allclose(model.v, model.B_pinv @ model.A.conj().T @ psi, atol=1e-12)

    def test_series_matches_dense_truncation(self):
        rng = np.random.default_rng(8)
        h = low_rank_psd(rng, 12, 3)
        psi = random_state(rng, 12)
        plan = SimulationPlan(0.7, 0.1, 0.1, K=6, M=5)
        out, model = nystrom_psd_evolve(h, psi, plan, seeded_rng(1), return_model=True)
        dense = truncated_exponential(model.h_hat(), 0.7, 6) @ psi
        np.testing.assert_allclose(out.amplitudes, dense, atol=1e-12)


class TestGeneral:
    @pytest.mark.parametrize("x", [0.1, 0.5, 1.0])
    def test_scalar_identity(self, x):
        assert abs(np.exp(1j * x) - scalar_split_exp(x, 30)) <= 1e-12

    def test_series_coefficients(self):
        np.testing.assert_allclose(cos_series_coefficients(2), [-1 / 2, 1 / 24, -1 / 720])
        np.testing.assert_allclose(sin_series_coefficients(2), [-1 / 6, 1 / 120, -1 / 5040])

    def test_zero_matrix_returns_psi(self):
        psi = np.array([0.6, 0.8])
        out = general_evolve(np.zeros((2, 2)), psi, SimulationPlan(1, 0.1, 0.1, K=3, M=2))
        np.testing.assert_array_equal(out.amplitudes, psi)
        with pytest.raises(ZeroFrobenius):
            sample_general_indices(HermitianMatrix.from_dense(np.zeros((2, 2))), 2, seeded_rng(0))

    def test_full_sampling_matches_oracle(self):
        rng = np.random.default_rng(2)
        h = hermitian(64, rng)
        psi = random_state(rng, 64)
        plan = general_plan(h, 1.0, 1e-6, 0.1)
        assert plan.M == 64 and plan.m_capped
        err = state_error(general_evolve(h, psi, plan), exact_evolve(h, psi, 1.0).state)
        assert err <= 1e-6

    def test_dense_equivalent(self):
        rng = np.random.default_rng(3)
        h = hermitian(10, rng)
        psi = random_state(rng, 10)
        plan = SimulationPlan(0.8, 0.1, 0.1, K=9, M=4)
        out, model = general_evolve(h, psi, plan, seeded_rng(4), return_model=True)
        a, t = model.A, 0.8
        g = t * t * (a.conj().T @ a)
        f = sum(c * np.linalg.matrix_power(g, j) for j, c in enumerate(cos_series_coefficients(9)))
        s = sum(c * np.linalg.matrix_power(g, j) for j, c in enumerate(sin_series_coefficients(9)))
        u = h.dense @ psi
        expect = psi + 1j * t * u + t ** 2 * a @ f @ a.conj().T @ psi + 1j * t ** 3 * a @ s @ a.conj().T @ u
        np.testing.assert_allclose(out.amplitudes, expect, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_sketch_unbiased(self, seed):
        rng = np.random.default_rng(seed)
        h = HermitianMatrix.from_dense(random_hermitian(rng, 16))
        draws = 10_000
        idx = sample_general_indices(h, draws, seeded_rng(seed))
        cols = general_sketch(h, idx) * np.sqrt(draws)  # M = 1 scaling per draw
        samples = np.einsum("it,jt->tij", cols, cols.conj())
        mean = samples.mean(axis=0)
        se_re = samples.real.std(axis=0, ddof=1) / np.sqrt(draws)
        se_im = samples.imag.std(axis=0, ddof=1) / np.sqrt(draws)
        target = h.dense @ h.dense
        assert np.all(np.abs(mean.real - target.real) <= 4 * se_re + 1e-12)
        assert np.all(np.abs(mean.imag - target.imag) <= 4 * se_im + 1e-12)

    def test_error_falls_with_m(self):
        rng = np.random.default_rng(5)
        h = hermitian(32, rng, rank=4)
        psi = random_state(rng, 32)
        ref = exact_evolve(h, psi, 1.0).state
        plan = general_plan(h, 1.0, 0.1, 0.1)
        medians = []
        for m in (4, 8, 16, 32):
            errs = [state_error(general_evolve(h, psi, plan.with_m(m), seeded_rng(s)), ref) for s in range(30)]
            medians.append(np.median(errs))
        assert all(b <= a for a, b in zip(medians, medians[1:])), medians


class TestTraceShift:
    def test_identity(self):
        alpha, hs = trace_shift(np.eye(3))
        assert alpha == 1 and not np.any(hs.dense)

    def test_traceless(self):
        alpha, hs = trace_shift(np.diag([1.0, -1.0]))
        assert alpha == 0
        np.testing.assert_array_equal(hs.dense, np.diag([1.0, -1.0]))

    @given(seeds, st.integers(1, 12))
    def test_minimises_frobenius(self, seed, n):
        rng = np.random.default_rng(seed)
        h = HermitianMatrix.from_dense(random_hermitian(rng, n))
        alpha, hs = trace_shift(h)
        best = np.linalg.norm(hs.dense)
        for beta in rng.normal(alpha, 2, size=100):
            assert best <= np.linalg.norm(h.dense - beta * np.eye(n)) + 1e-12

    def test_scalar_matrix_is_exact(self):
        psi = random_state(np.random.default_rng(0), 6)
        h = HermitianMatrix.from_dense(2.0 * np.eye(6))
        for m in (1, 3, 6):
            out = evolve_with_shift(h, psi, SimulationPlan(1.3, 0.1, 0.1, K=4, M=m), seeded_rng(0))
            np.testing.assert_allclose(out.amplitudes, np.exp(2.6j) * psi, atol=1e-15)

    def test_traceless_unchanged(self):
        rng = np.random.default_rng(1)
        a = random_hermitian(rng, 8)
        a -= np.trace(a).real / 8 * np.eye(8)
        psi = random_state(rng, 8)
        plan = SimulationPlan(1, 0.1, 0.1, K=6, M=5)
        x = evolve_with_shift(a, psi, plan, seeded_rng(2))
        y = general_evolve(a, psi, plan, seeded_rng(2))
        np.testing.assert_allclose(x.amplitudes, y.amplitudes, atol=1e-13)

    def test_shift_vs_oracle(self):
        rng = np.random.default_rng(2)
        h = HermitianMatrix.from_dense(random_hermitian(rng, 32) / 8 + 3 * np.eye(32))
        psi = random_state(rng, 32)
        _, hs = trace_shift(h)
        plan = general_plan(hs, 1.0, 1e-4, 0.1)
        err = state_error(evolve_with_shift(h, psi, plan), exact_evolve(h, psi, 1.0).state)
        assert err <= 1e-4
