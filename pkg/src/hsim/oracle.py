"""Exact reference evolution ``psi(t) = exp(i H t) psi`` and error metrics.

Two independent routes are provided so that derived test values never rest
on a single implementation: diagonalisation (``"eigen"``) and a
scaled-and-squared Taylor series with a rigorous remainder (``"series"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DimensionTooLarge
from .matrix import (
    HermitianMatrix,
    StateVector,
    as_amplitudes,
    hermitian_eigendecompose,
    spectral_norm,
)

EIGEN = "eigen"
SERIES = "series"
SERIES_MAX_DIM = 256


@dataclass(frozen=True)
class EvolutionResult:
    state: StateVector
    method: str
    residual_estimate: float


def _dense(h) -> np.ndarray:
    if isinstance(h, HermitianMatrix):
        return h.dense
    return np.asarray(h, dtype=complex)


def _taylor_plan(theta: float, tol: float = 1e-18) -> tuple[int, int, float]:
    """Squarings ``s`` and degree ``m`` so the scaled series tail is below ``tol``.

    After scaling ``theta / 2^s <= 1/2`` the tail beyond degree ``m`` is bounded
    by ``x^{m+1} / (m+1)! * 1 / (1 - x/(m+2))``.
    """
    s = 0 if theta <= 0.5 else math.ceil(math.log2(theta / 0.5))
    x = theta / 2 ** s
    m, term = 0, 1.0
    while True:
        term *= x / (m + 1)  # x^{m+1}/(m+1)!
        tail = term / (1 - x / (m + 2))
        if tail <= tol or m >= 60:
            return s, m, tail
        m += 1


def _series_operator(a: np.ndarray, t: float) -> tuple[np.ndarray, float]:
    n = a.shape[0]
    x = 1j * t * a
    theta = float(np.max(np.sum(np.abs(x), axis=1))) if n else 0.0
    s, m, tail = _taylor_plan(theta)
    y = x / 2 ** s
    p = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, m + 1):
        term = term @ y / k
        p = p + term
    for _ in range(s):
        p = p @ p
    reps = 2 ** s
    return p, reps * tail * (1 + tail) ** reps


def evolution_operator(h, t: float, method: str = EIGEN) -> np.ndarray:
    """Dense ``exp(i H t)``."""
    a = _dense(h)
    if method == EIGEN:
        w, v = hermitian_eigendecompose(a)
        return (v * np.exp(1j * w * t)) @ v.conj().T
    if method == SERIES:
        if a.shape[0] > SERIES_MAX_DIM:
            raise DimensionTooLarge(f"series path limited to dim {SERIES_MAX_DIM}")
        return _series_operator(a, t)[0]
    raise ValueError(f"unknown method {method!r}")


def exact_evolve(h, psi, t: float, method: str = EIGEN) -> EvolutionResult:
    a = _dense(h)
    x = as_amplitudes(psi)
    if x.size != a.shape[0]:
        raise DimensionMismatch(f"matrix dim {a.shape[0]} vs state dim {x.size}")
    if method == EIGEN:
        w, v = hermitian_eigendecompose(a)
        out = v @ (np.exp(1j * w * t) * (v.conj().T @ x))
        resid = abs(t) * float(np.linalg.norm(a @ v - v * w)) + float(
            np.linalg.norm(v.conj().T @ v - np.eye(a.shape[0])))
    elif method == SERIES:
        if a.shape[0] > SERIES_MAX_DIM:
            raise DimensionTooLarge(f"series path limited to dim {SERIES_MAX_DIM}")
        op, resid = _series_operator(a, t)
        out = op @ x
    else:
        raise ValueError(f"unknown method {method!r}")
    return EvolutionResult(StateVector(out), method, resid)


def state_error(a, b) -> float:
    """Plain Euclidean distance; no global phase is quotiented out."""
    x, y = as_amplitudes(a), as_amplitudes(b)
    if x.size != y.size:
        raise DimensionMismatch(f"state dims {x.size} and {y.size} differ")
    return float(np.linalg.norm(x - y))


def operator_error(x, y) -> tuple[float, float]:
    """``(spectral, frobenius)`` norms of ``X - Y``."""
    x, y = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
    if x.shape != y.shape:
        raise DimensionMismatch(f"operator shapes {x.shape} and {y.shape} differ")
    d = x - y
    return spectral_norm(d), float(np.linalg.norm(d))
