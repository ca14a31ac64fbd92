"""Classical randomized Hamiltonian simulation via the Nyström method.

Two estimators of ``exp(i H t) psi``:

* PSD ``H``: sample ``M`` columns with probability ``H_qq / tr H``, form the
  Nyström approximation ``H_hat = A B^+ A^H`` and apply the truncated series
  ``I + g_K(H_hat) H_hat`` without ever materialising an ``N x N`` matrix.
* general Hermitian ``H``: sample columns with probability
  ``||h_i||^2 / ||H||_F^2``, so that ``A A^H`` estimates ``H^2``, and use the
  split ``e^{ix} = 1 + ix + f(x^2) x^2 + i g(x^2) x^3``.

Both sample counts and truncation orders come from closed-form calculators
(:func:`psd_plan`, :func:`general_plan`).  At desk scale the sample count
usually exceeds ``N``; the plan then caps ``M`` at ``N`` and the estimators use
every row exactly once, leaving only the truncation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParams, NotPsd, ZeroFrobenius, ZeroTrace
from .matrix import (
    HermitianMatrix,
    StateVector,
    as_amplitudes,
    as_hermitian,
    hermitian_eigendecompose,
    matvec,
    pinv_hermitian,
)
from .sampling import GENERAL, PSD, RowSearchOracle, row_search_sample_many, seeded_rng

PSD_TOL = 1e-10


@dataclass(frozen=True)
class SimulationPlan:
    t: float
    eps: float
    delta: float
    K: int
    M: int
    seed: int = 0
    m_capped: bool = False
    m_required: float = float("nan")  # uncapped sample-count formula, before ceil
    m_branches: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.K < 1 or self.M < 1:
            raise InvalidParams(f"need K >= 1 and M >= 1, got K={self.K}, M={self.M}")

    def exhaustive_for(self, dim: int) -> bool:
        """A capped plan at ``M >= N`` uses every row once instead of sampling."""
        return self.m_capped and self.M >= dim

    def with_m(self, m: int) -> "SimulationPlan":
        return replace(self, M=int(m))

    def with_seed(self, seed: int) -> "SimulationPlan":
        return replace(self, seed=int(seed))


def _check_tolerances(t: float, eps: float, delta: float) -> None:
    if not t > 0:
        raise InvalidParams("t must be > 0")
    if not (0 < eps <= 1 and 0 < delta <= 1):
        raise InvalidParams("eps and delta must lie in (0, 1]")


def psd_truncation_order(t: float, h_norm: float, eps: float) -> int:
    """``ceil(e t ||H|| + ln(2 / eps))``, floored at 1."""
    return max(1, math.ceil(math.e * t * h_norm + math.log(2 / eps)))


def psd_sample_branches(trace: float, t: float, eps: float, delta: float) -> tuple[float, float]:
    """The two lower bounds whose maximum is the PSD sample count."""
    a = 405 * trace
    b = (72 * trace * t / eps) * math.log(36 * trace * t / (eps * delta)) if trace > 0 else 0.0
    return a, b


def psd_plan(h, t: float, eps: float, delta: float, seed: int = 0) -> SimulationPlan:
    h = as_hermitian(h)
    _check_tolerances(t, eps, delta)
    nb = h.norms
    evals, _ = hermitian_eigendecompose(h)
    if evals[0] < -PSD_TOL * max(nb.spectral, 1e-300):
        raise NotPsd(f"smallest eigenvalue {evals[0]:.3e} is negative")
    k = psd_truncation_order(t, nb.spectral, eps)
    branches = psd_sample_branches(nb.trace, t, eps, delta)
    m_req = max(branches)
    m = max(1, math.ceil(m_req))
    capped = m > h.dim
    return SimulationPlan(t, eps, delta, k, min(m, h.dim), seed, capped, m_req, branches)


def general_sample_branches(h_norm: float, fro: float, t: float, eps: float,
                            delta: float) -> tuple[float, float]:
    """``(prefactor, log factor)`` of the general-Hermitian sample count."""
    pre = 256 * t ** 4 * (1 + t ** 2 * h_norm ** 2) * fro ** 2 * h_norm ** 2 / eps ** 2
    logf = math.log(4 * fro ** 2 / (delta * h_norm ** 2)) if h_norm > 0 else 0.0
    return pre, logf


def general_truncation_order(t: float, h_norm: float, eps: float) -> int:
    """``ceil(4 t sqrt(||H||^2 + eps) + ln(4 (1 + t ||H||) / eps))``."""
    return max(1, math.ceil(4 * t * math.sqrt(h_norm ** 2 + eps)
                            + math.log(4 * (1 + t * h_norm) / eps)))


def general_plan(h, t: float, eps: float, delta: float, seed: int = 0) -> SimulationPlan:
    h = as_hermitian(h)
    _check_tolerances(t, eps, delta)
    nb = h.norms
    k = general_truncation_order(t, nb.spectral, eps)
    pre, logf = general_sample_branches(nb.spectral, nb.frobenius, t, eps, delta)
    m_req = pre * logf
    m = max(1, math.ceil(m_req))
    capped = m > h.dim
    return SimulationPlan(t, eps, delta, k, min(m, h.dim), seed, capped, m_req, (pre, logf))


def truncation_bound(t: float, k: int, h_norm: float) -> float:
    """``(t ||H_hat||)^{K+1} / (K+1)!`` evaluated in log space."""
    if k < 0:
        raise InvalidParams("K must be >= 0")
    x = abs(t) * h_norm
    if x == 0:
        return 0.0
    return math.exp((k + 1) * math.log(x) - math.lgamma(k + 2))


def taylor_coefficient(t: float, k: int) -> complex:
    """``(i t)^k / k!`` with magnitude from log space and phase ``i^k`` tracked apart."""
    if t == 0:
        return 1.0 + 0j if k == 0 else 0j
    mag = math.exp(k * math.log(abs(t)) - math.lgamma(k + 1))
    phase = (1, 1j, -1, -1j)[k % 4]
    if t < 0 and k % 2:
        phase = -phase
    return mag * phase


def truncated_exponential(hhat: np.ndarray, t: float, k: int) -> np.ndarray:
    """Dense ``I + g_K(H_hat) H_hat = sum_{j<=K} (i t H_hat)^j / j!``."""
    n = hhat.shape[0]
    out = np.eye(n, dtype=complex)
    power = np.eye(n, dtype=complex)
    for j in range(1, k + 1):
        power = power @ hhat
        out = out + taylor_coefficient(t, j) * power
    return out


# -- PSD algorithm -------------------------------------------------------

@dataclass
class NystromPsdModel:
    indices: np.ndarray
    A: np.ndarray  # N x M, column j = H[:, t_j]
    B: np.ndarray
    B_pinv: np.ndarray
    D: np.ndarray
    v: np.ndarray

    def h_hat(self) -> np.ndarray:
        """Dense ``A B^+ A^H``; only for checks at small N."""
        return self.A @ self.B_pinv @ self.A.conj().T


def sample_psd_indices(h: HermitianMatrix, m: int, rng: np.random.Generator) -> np.ndarray:
    """``M`` i.i.d. indices with ``p(q) = H_qq / tr H`` (repetition allowed)."""
    diag = h.diagonal
    if not np.sum(diag) > 0:
        raise ZeroTrace("PSD sampling needs a positive trace")
    oracle = RowSearchOracle.from_weights(np.clip(diag, 0, None), PSD)
    return row_search_sample_many(oracle, rng, m)


def build_psd_model(h: HermitianMatrix, psi: np.ndarray, indices: np.ndarray,
                    rtol: float | None = None) -> NystromPsdModel:
    n, m = h.dim, len(indices)
    b = h.submatrix(indices, indices)
    b = (b + b.conj().T) / 2
    b_pinv = pinv_hermitian(b, rtol)
    gram = np.zeros((m, m), dtype=complex)
    proj = np.zeros(m, dtype=complex)
    # accumulate A^H A and A^H psi over row blocks of height M
    for lo in range(0, n, m):
        rows = np.arange(lo, min(lo + m, n))
        e = h.submatrix(rows, indices)
        gram += e.conj().T @ e
        proj += e.conj().T @ psi[rows]
    a = h.submatrix(np.arange(n), indices)
    return NystromPsdModel(indices=np.asarray(indices), A=a, B=b, B_pinv=b_pinv,
                           D=b_pinv @ gram, v=b_pinv @ proj)


def psd_series_apply(model: NystromPsdModel, t: float, k: int) -> np.ndarray:
    """``g_K(D) v`` via ``b_j = (it)^{K-j}/(K-j)! v + D b_{j-1}``."""
    b = taylor_coefficient(t, k) * model.v
    for j in range(1, k):
        b = taylor_coefficient(t, k - j) * model.v + model.D @ b
    return b


def nystrom_psd_evolve(h, psi, plan: SimulationPlan, rng: np.random.Generator | None = None,
                       *, return_model: bool = False):
    """Approximate ``exp(i H t) psi`` for PSD ``H``; returns ``psi + A b_{K-1}``."""
    h = as_hermitian(h)
    x = as_amplitudes(psi)
    if plan.exhaustive_for(h.dim):
        if not np.sum(h.diagonal) > 0:
            raise ZeroTrace("PSD evolution needs a positive trace")
        idx = np.arange(h.dim)
    else:
        idx = sample_psd_indices(h, plan.M, rng if rng is not None else seeded_rng(plan.seed))
    model = build_psd_model(h, x, idx)
    out = StateVector(x + model.A @ psd_series_apply(model, plan.t, plan.K))
    return (out, model) if return_model else out


# -- general Hermitian algorithm -----------------------------------------

def cos_series_coefficients(k: int) -> np.ndarray:
    """Coefficients of ``f_K(x) = sum_{j<=K} (-1)^{j+1} x^j / (2j+2)!``."""
    return np.array([(-1) ** (j + 1) * math.exp(-math.lgamma(2 * j + 3)) for j in range(k + 1)])


def sin_series_coefficients(k: int) -> np.ndarray:
    """Coefficients of ``g_K(x) = sum_{j<=K} (-1)^{j+1} x^j / (2j+3)!``."""
    return np.array([(-1) ** (j + 1) * math.exp(-math.lgamma(2 * j + 4)) for j in range(k + 1)])


def _horner(coeffs: np.ndarray, apply, vec: np.ndarray) -> np.ndarray:
    r = coeffs[-1] * vec
    for c in coeffs[-2::-1]:
        r = c * vec + apply(r)
    return r


def scalar_split_exp(x: float, k: int) -> complex:
    """``1 + ix + f_K(x^2) x^2 + i g_K(x^2) x^3``; tends to ``e^{ix}``."""
    x2 = x * x
    f = sum(c * x2 ** j for j, c in enumerate(cos_series_coefficients(k)))
    g = sum(c * x2 ** j for j, c in enumerate(sin_series_coefficients(k)))
    return 1 + 1j * x + f * x2 + 1j * g * x2 * x


@dataclass
class GeneralModel:
    indices: np.ndarray
    A: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray


def sample_general_indices(h: HermitianMatrix, m: int, rng: np.random.Generator) -> np.ndarray:
    """``M`` i.i.d. indices with ``p(i) = ||h_i||^2 / ||H||_F^2``."""
    w = h.row_norms_sq
    if not np.sum(w) > 0:
        raise ZeroFrobenius("general sampling needs a nonzero matrix")
    oracle = RowSearchOracle.from_weights(w, GENERAL)
    return row_search_sample_many(oracle, rng, m)


def general_sketch(h: HermitianMatrix, indices: np.ndarray) -> np.ndarray:
    """``A`` with column ``j`` equal to ``H[:, t_j] / sqrt(M p(t_j))``."""
    w = h.row_norms_sq
    p = w[indices] / np.sum(w)
    a = h.submatrix(np.arange(h.dim), indices)
    return a / np.sqrt(len(indices) * p)


def general_evolve(h, psi, plan: SimulationPlan, rng: np.random.Generator | None = None,
                   *, return_model: bool = False):
    """Approximate ``exp(i H t) psi`` for Hermitian ``H``.

    Returns ``psi + i t u + t^2 A f_K(t^2 A^H A) v + i t^3 A g_K(t^2 A^H A) z``
    with ``u = H psi``, ``v = A^H psi`` and ``z = A^H u``.  The zero matrix
    short-circuits to ``psi``.
    """
    h = as_hermitian(h)
    x = as_amplitudes(psi)
    t, k = plan.t, plan.K
    if not np.any(h.row_norms_sq):
        out = StateVector(x.copy())
        return (out, None) if return_model else out
    if plan.exhaustive_for(h.dim):
        # every column once, unweighted: A A^H = H^2 exactly
        idx = np.arange(h.dim)
        a = h.submatrix(idx, idx)
    else:
        idx = sample_general_indices(h, plan.M, rng if rng is not None else seeded_rng(plan.seed))
        a = general_sketch(h, idx)
    u = matvec(h, x).amplitudes
    v = a.conj().T @ x
    z = a.conj().T @ u
    gram = a.conj().T @ a
    t2 = t * t

    def apply(r):
        return t2 * (gram @ r)

    fv = _horner(cos_series_coefficients(k), apply, v)
    gz = _horner(sin_series_coefficients(k), apply, z)
    out = StateVector(x + 1j * t * u + t2 * (a @ fv) + 1j * t2 * t * (a @ gz))
    if return_model:
        return out, GeneralModel(indices=idx, A=a, u=u, v=v, z=z)
    return out


def trace_shift(h) -> tuple[float, HermitianMatrix]:
    """``alpha = tr H / N`` minimises ``||H - alpha I||_F``."""
    h = as_hermitian(h)
    alpha = float(np.sum(h.diagonal)) / h.dim
    return alpha, h.shifted(alpha)


def evolve_with_shift(h, psi, plan: SimulationPlan, rng: np.random.Generator | None = None) -> StateVector:
    """``e^{i alpha t}`` times the general estimator run on ``H - alpha I``."""
    alpha, shifted = trace_shift(h)
    out = general_evolve(shifted, psi, plan, rng)
    return StateVector(np.exp(1j * alpha * plan.t) * out.amplitudes)
