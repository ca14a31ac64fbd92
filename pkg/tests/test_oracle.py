import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian, random_state, seeds
from hsim.errors import DimensionMismatch, DimensionTooLarge
from hsim.oracle import (
    EIGEN,
    SERIES,
    evolution_operator,
    exact_evolve,
    operator_error,
    state_error,
)


class TestExactEvolve:
    @pytest.mark.parametrize("method", [EIGEN, SERIES])
    def test_t_zero(self, method):
        psi = random_state(np.random.default_rng(0), 5)
        h = random_hermitian(np.random.default_rng(1), 5)
        np.testing.assert_allclose(exact_evolve(h, psi, 0.0, method).state.amplitudes, psi, atol=1e-15)

    @pytest.mark.parametrize("method", [EIGEN, SERIES])
    def test_pi_phase(self, method):
        out = exact_evolve(np.array([[math.pi]]), [1.0], 1.0, method).state.amplitudes
        assert abs(out[0] - (-1)) < 1e-14

    @given(seeds)
    def test_paths_agree_n16(self, seed):
        rng = np.random.default_rng(seed)
        h, psi = random_hermitian(rng, 16), random_state(rng, 16)
        a = exact_evolve(h, psi, 1.0, EIGEN).state
        b = exact_evolve(h, psi, 1.0, SERIES).state
        assert state_error(a, b) <= 1e-10

    @given(seeds, st.integers(1, 20), st.floats(-3, 3))
    def test_unitarity(self, seed, n, t):
        rng = np.random.default_rng(seed)
        for method in (EIGEN, SERIES):
            out = exact_evolve(random_hermitian(rng, n), random_state(rng, n), t, method).state
            assert abs(out.norm - 1) <= 1e-10

    @given(seeds, st.integers(1, 12), st.floats(-2, 2), st.floats(-2, 2))
    def test_group_law(self, seed, n, t1, t2):
        rng = np.random.default_rng(seed)
        h, psi = random_hermitian(rng, n), random_state(rng, n)
        two = exact_evolve(h, exact_evolve(h, psi, t1).state, t2).state
        one = exact_evolve(h, psi, t1 + t2).state
        assert state_error(two, one) <= 1e-9

    @given(seeds, st.integers(1, 10), st.floats(-5, 5))
    def test_diagonal_phases(self, seed, n, t):
        rng = np.random.default_rng(seed)
        d = rng.normal(size=n)
        psi = random_state(rng, n)
        expect = np.exp(1j * d * t) * psi
        for method in (EIGEN, SERIES):
            np.testing.assert_allclose(exact_evolve(np.diag(d), psi, t, method).state.amplitudes,
                                       expect, atol=1e-12)

    def test_series_residual_is_tiny(self):
        h = random_hermitian(np.random.default_rng(2), 8, scale=3)
        assert exact_evolve(h, random_state(np.random.default_rng(3), 8), 2.0, SERIES).residual_estimate < 1e-12

    def test_matches_operator(self):
        rng = np.random.default_rng(4)
        h, psi = random_hermitian(rng, 6), random_state(rng, 6)
        np.testing.assert_allclose(evolution_operator(h, 0.7) @ psi,
                                   exact_evolve(h, psi, 0.7).state.amplitudes, atol=1e-13)

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            exact_evolve(np.eye(2), [1, 0, 0], 1.0)
        with pytest.raises(DimensionTooLarge):
            exact_evolve(np.eye(300), np.ones(300), 1.0, SERIES)
        with pytest.raises(ValueError):
            exact_evolve(np.eye(2), [1, 0], 1.0, "magic")


class TestMetrics:
    def test_state_error_examples(self):
        a = np.array([1, 0j])
        assert state_error(a, a) == 0
        assert state_error([1, 0], [0, 1]) == pytest.approx(math.sqrt(2))

    def test_no_global_phase_quotient(self):
        assert state_error([1, 0], [-1, 0]) == pytest.approx(2)

    @given(seeds, st.integers(1, 10))
    def test_state_error_definition(self, seed, n):
        rng = np.random.default_rng(seed)
        a, b = random_state(rng, n), random_state(rng, n)
        assert state_error(a, b) == pytest.approx(math.sqrt(np.sum(np.abs(a - b) ** 2)), rel=1e-14)

    def test_operator_error_examples(self):
        x = np.eye(3)
        assert operator_error(x, x) == (0.0, 0.0)
        spn, fro = operator_error(np.eye(2), np.zeros((2, 2)))
        assert spn == pytest.approx(1) and fro == pytest.approx(math.sqrt(2))

    @given(seeds, st.integers(1, 8))
    def test_frobenius_dominates_spectral(self, seed, n):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        spn, fro = operator_error(x, np.zeros((n, n)))
        assert fro >= spn * (1 - 1e-12)
        assert spn == pytest.approx(np.linalg.norm(x, 2), rel=1e-10)
