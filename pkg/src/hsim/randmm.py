"""Monte Carlo approximate matrix multiplication ``AB ~ CR``.

``c`` outer products ``A^{i_t} B_{i_t} / (c p_{i_t})`` are drawn i.i.d. with
replacement; the estimator is unbiased entrywise for any distribution that is
positive wherever ``A^k B_k`` is nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDistribution, InvalidParams, ZeroProduct


@dataclass(frozen=True)
class SketchPair:
    C: np.ndarray
    R: np.ndarray
    chosen_indices: np.ndarray
    probabilities_used: np.ndarray

    @property
    def product(self) -> np.ndarray:
        return self.C @ self.R


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    if a.shape[1] != b.shape[0]:
        raise InvalidParams(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return a, b


def _outer_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``||A^k||_2 ||B_k||_2`` for every inner index ``k``."""
    return np.linalg.norm(a, axis=0) * np.linalg.norm(b, axis=1)


def optimal_probabilities(a, b) -> np.ndarray:
    """``p_k`` proportional to ``||A^k|| ||B_k||``; minimises the expected error."""
    a, b = _pair(a, b)
    w = _outer_weights(a, b)
    total = w.sum()
    if total == 0:
        raise ZeroProduct("every outer product A^k B_k is zero")
    return w / total


def _check_distribution(a: np.ndarray, b: np.ndarray, p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != a.shape[1]:
        raise InvalidDistribution(f"need {a.shape[1]} probabilities, got {p.size}")
    if np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1) > 1e-10:
        raise InvalidDistribution("probabilities must be >= 0 and sum to 1")
    if np.any((p == 0) & (_outer_weights(a, b) > 0)):
        raise InvalidDistribution("p_k = 0 for a nonzero outer product A^k B_k")
    return p


def sketch_multiply(a, b, c: int, p, rng: np.random.Generator) -> SketchPair:
    a, b = _pair(a, b)
    if c < 1:
        raise InvalidParams("sample count c must be >= 1")
    p = _check_distribution(a, b, p)
    idx = rng.choice(p.size, size=c, replace=True, p=p)
    scale = 1.0 / np.sqrt(c * p[idx])
    return SketchPair(C=a[:, idx] * scale, R=b[idx, :] * scale[:, None],
                      chosen_indices=idx, probabilities_used=p[idx])


def entrywise_moments(a, b, c: int, p) -> tuple[np.ndarray, np.ndarray]:
    """Exact entrywise mean and variance of ``CR``.

    Variance is ``E|X - EX|^2`` so complex inputs are handled; for real
    matrices it reduces to ``(1/c) sum_k A_ik^2 B_kj^2 / p_k - (AB)_ij^2 / c``.
    Indices with ``p_k = 0`` contribute nothing (they are never drawn and are
    required to have a zero outer product).
    """
    a, b = _pair(a, b)
    p = _check_distribution(a, b, p)
    ab = a @ b
    nz = p > 0
    second = (np.abs(a[:, nz]) ** 2 / p[nz]) @ (np.abs(b[nz, :]) ** 2)
    return ab, (second - np.abs(ab) ** 2) / c


def expected_frobenius_error(a, b, c: int, p) -> float:
    """``E ||AB - CR||_F^2 = sum_k ||A^k||^2 ||B_k||^2 / (c p_k) - ||AB||_F^2 / c``."""
    a, b = _pair(a, b)
    p = _check_distribution(a, b, p)
    w = _outer_weights(a, b)
    nz = p > 0
    return float(np.sum(w[nz] ** 2 / p[nz]) / c - np.linalg.norm(a @ b) ** 2 / c)


def sample_count_for(eps: float, beta: float, delta: float) -> int:
    """Markov-bound sample count ``ceil(beta / (delta^2 eps^2))``."""
    if not (0 < eps <= 1 and 0 < delta <= 1 and 0 < beta <= 1):
        raise InvalidParams("need eps, delta in (0, 1] and beta in (0, 1]")
    # round first so 399.99999999999994 from binary arithmetic stays 400
    return max(1, math.ceil(round(beta / (delta ** 2 * eps ** 2), 9)))
