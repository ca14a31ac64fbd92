"""Dense emulation of the quantum-walk LCU Hamiltonian simulation.

The walk lives on ``|j>|b>|k>|b'>`` with ``j, k < N`` and ``b, b' in {0,1}``
(dimension ``4 N^2``), flattened as ``((2j + b) * 2N) + (2k + b')``.  The
isometry ``T`` maps ``|j>|b>`` to ``|j>|b>|phi_jb>``, ``S`` swaps the two
halves and ``U = i S (2 T T^H - I)``.  A Bessel-weighted sum
``V_k = sum_{|m|<=k} alpha_m U^m`` compressed back through ``T`` approximates
``exp(i z H / ||H||_1)``; long times are split into segments with ``|z| <= 1/2``.

This is a numerical check of the construction, not a circuit compiler.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooLarge, InvalidParams, ZeroMatrix
from .matrix import (
    HermitianMatrix,
    NormBundle,
    StateVector,
    as_amplitudes,
    as_hermitian,
    hermitian_eigendecompose,
)

MAX_WALK_DIM = 16
SEGMENT_Z = 0.5


class NegativeDiagonalWarning(UserWarning):
    """A negative diagonal entry has no square root satisfying the walk identity."""


def _induced1(a: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(a), axis=1)))


def sqrt_conj_entry(h_jk: complex, j: int, k: int) -> complex:
    """``sqrt(H_jk^*)`` under the sign convention that makes the walk identity hold.

    For ``H_jk = r e^{i phi}`` that is not a negative real, ``sqrt(r) e^{-i phi/2}``;
    for a negative real, ``sign(j - k) i sqrt(|H_jk|)``.  The latter is
    undefined on the diagonal; ``+i sqrt(|H_jj|)`` is used there with a warning
    and the compression of that entry comes out as ``+|H_jj|``.
    """
    h_jk = complex(h_jk)
    if h_jk.imag == 0 and h_jk.real < 0:
        sgn = (j > k) - (j < k)
        if sgn == 0:
            warnings.warn(f"negative diagonal entry H[{j},{j}] = {h_jk.real}; "
                          "using +i*sqrt(|H_jj|)", NegativeDiagonalWarning, stacklevel=3)
            sgn = 1
        return sgn * 1j * math.sqrt(-h_jk.real)
    r, phi = abs(h_jk), math.atan2(h_jk.imag, h_jk.real)
    return math.sqrt(r) * complex(math.cos(phi / 2), -math.sin(phi / 2))


@dataclass(frozen=True)
class PrepState:
    row_index: int
    vector: np.ndarray  # length 2N over |k>|b>, index 2k + b


def prep_state(h, j: int, lambda1: float | None = None) -> PrepState:
    """``|phi_j0>``: amplitude ``sqrt(H_jk^*)/sqrt(L)`` on ``|k>|0>`` and
    ``sqrt((L - sigma_j)/N)/sqrt(L)`` on ``|k>|1>``, with ``L = ||H||_1``."""
    a = h.dense if isinstance(h, HermitianMatrix) else np.asarray(h, dtype=complex)
    n = a.shape[0]
    lam = _induced1(a) if lambda1 is None else lambda1
    if lam <= 0:
        raise ZeroMatrix("||H||_1 is zero")
    sigma = float(np.sum(np.abs(a[j])))
    vec = np.empty(2 * n, dtype=complex)
    vec[0::2] = [sqrt_conj_entry(a[j, k], j, k) for k in range(n)]
    vec[1::2] = math.sqrt(max(lam - sigma, 0.0) / n)
    return PrepState(j, vec / math.sqrt(lam))


@dataclass
class WalkOperator:
    n: int
    lambda1: float
    U: np.ndarray
    T: np.ndarray
    S: np.ndarray

    @property
    def dimension(self) -> int:
        return 4 * self.n * self.n

    def compression(self) -> np.ndarray:
        """``(I x <0|) T^H S T (I x |0>)``, which should equal ``H / ||H||_1``."""
        t0 = self.T[:, 0::2]
        return t0.conj().T @ (self.S @ t0)

    def flag_leak(self) -> np.ndarray:
        """``(I x <1|) T^H S T (I x |0>)``, which should vanish."""
        return self.T[:, 1::2].conj().T @ (self.S @ self.T[:, 0::2])


def _swap_permutation(n: int) -> np.ndarray:
    d = 2 * n
    idx = np.arange(d * d)
    x, y = divmod(idx, d)
    s = np.zeros((d * d, d * d))
    s[y * d + x, idx] = 1.0
    return s


def build_walk(h, lambda1: float | None = None) -> WalkOperator:
    a = h.dense if isinstance(h, HermitianMatrix) else np.asarray(h, dtype=complex)
    n = a.shape[0]
    if n > MAX_WALK_DIM:
        raise DimensionTooLarge(f"dense walk emulation limited to N <= {MAX_WALK_DIM}, got {n}")
    lam = _induced1(a) if lambda1 is None else lambda1
    if lam <= 0:
        raise ZeroMatrix("||H||_1 is zero")
    d = 2 * n
    tmat = np.zeros((d * d, d), dtype=complex)
    flag = np.zeros(d, dtype=complex)
    flag[1] = 1.0  # |phi_j1> = |0>|1>
    for j in range(n):
        phi0 = prep_state(a, j, lam).vector
        for b, phi in ((0, phi0), (1, flag)):
            col = 2 * j + b
            tmat[col * d:(col + 1) * d, col] = phi
    s = _swap_permutation(n)
    u = 1j * s @ (2 * tmat @ tmat.conj().T - np.eye(d * d))
    return WalkOperator(n, lam, u, tmat, s)


@dataclass
class EigenCheck:
    eigenvalues: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    residuals: np.ndarray  # shape (N, 2): relative ||U x - mu x|| / ||x||
    vector_norms: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def walk_eigen_check(h, walk: WalkOperator | None = None) -> EigenCheck:
    """Verify ``U (T + i mu S T)|lambda>|0> = mu (...)`` for ``mu = +-e^{+-i asin(lambda/L)}``."""
    h = as_hermitian(h)
    walk = walk or build_walk(h)
    evals, evecs = hermitian_eigendecompose(h)
    ratio = np.clip(evals / walk.lambda1, -1.0, 1.0)
    theta = np.arcsin(ratio)
    mus = (np.exp(1j * theta), -np.exp(-1j * theta))
    resid = np.zeros((h.dim, 2))
    norms = np.zeros((h.dim, 2))
    for i in range(h.dim):
        lam0 = np.zeros(2 * h.dim, dtype=complex)
        lam0[0::2] = evecs[:, i]
        tx = walk.T @ lam0
        stx = walk.S @ tx
        for s, mu in enumerate((mus[0][i], mus[1][i])):
            x = tx + 1j * mu * stx
            nx = float(np.linalg.norm(x))
            norms[i, s] = nx
            resid[i, s] = float(np.linalg.norm(walk.U @ x - mu * x)) / nx if nx > 0 else 0.0
    return EigenCheck(evals, mus[0], mus[1], resid, norms)


def bessel_j(m: int, z: float) -> float:
    """Integer-order Bessel ``J_m(z)`` by its power series.

    Intended for ``|z| <= 4`` where the alternating series loses at most a
    few ulps; negative orders use ``J_{-m} = (-1)^m J_m``.
    """
    m = int(m)
    am = abs(m)
    if z == 0:
        return 1.0 if m == 0 else 0.0
    half = z / 2
    lead = math.exp(am * math.log(abs(half)) - math.lgamma(am + 1))
    if half < 0 and am % 2:
        lead = -lead
    q = -half * half
    term, total, r = lead, lead, 0
    while True:
        term *= q / ((r + 1) * (r + 1 + am))
        total += term
        r += 1
        if abs(term) <= 1e-17 * abs(total) or term == 0:
            break
    if m < 0 and am % 2:
        total = -total
    return total


@dataclass(frozen=True)
class LcuSeries:
    z: float
    k: int
    alphas: np.ndarray  # alphas[m + k] for m = -k..k

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.k, self.k + 1)

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.alphas)))


def lcu_series(z: float, k: int) -> LcuSeries:
    """Coefficients ``alpha_m = J_m(z) / sum_{|j|<=k} J_j(z)``."""
    if k < 0:
        raise InvalidParams("k must be >= 0")
    j = np.array([bessel_j(m, z) for m in range(-k, k + 1)])
    return LcuSeries(z, k, j / j.sum())


def truncation_error_bound(z: float, norm_ratio: float, k: int) -> float:
    """``(||H|| / ||H||_1) |z/2|^{k+1} / k!``."""
    if z == 0 or norm_ratio == 0:
        return 0.0
    return norm_ratio * math.exp((k + 1) * math.log(abs(z) / 2) - math.lgamma(k + 1))


def truncation_order_for_z(z: float, norm_ratio: float, eps: float, k_max: int = 200) -> int:
    """Smallest ``k >= |z|`` whose truncation bound is at most ``eps``."""
    if not 0 < eps:
        raise InvalidParams("eps must be > 0")
    k = max(math.ceil(abs(z)), 0)
    while truncation_error_bound(z, norm_ratio, k) > eps:
        k += 1
        if k > k_max:
            raise InvalidParams(f"no truncation order <= {k_max} reaches eps={eps}")
    return k


def truncation_order(t: float, h_norms: NormBundle, eps: float) -> int:
    """Truncation order for one segment of length ``t`` (``z = t ||H||_1``)."""
    if h_norms.induced1 == 0:
        return 0
    return truncation_order_for_z(t * h_norms.induced1, h_norms.spectral / h_norms.induced1, eps)


def compressed_vk(walk: WalkOperator, series: LcuSeries) -> np.ndarray:
    """``(I x <0|) T^H V_k T (I x |0>)`` as an ``N x N`` matrix."""
    y0 = walk.T[:, 0::2]
    acc = series.alphas[series.k] * y0
    fwd, bwd = y0, y0
    uh = walk.U.conj().T
    for m in range(1, series.k + 1):
        fwd = walk.U @ fwd
        bwd = uh @ bwd
        acc = acc + series.alphas[series.k + m] * fwd + series.alphas[series.k - m] * bwd
    return y0.conj().T @ acc


def vk_operator(walk: WalkOperator, series: LcuSeries) -> np.ndarray:
    """Full ``V_k`` on the walk space; only for small checks."""
    acc = series.alphas[series.k] * np.eye(walk.dimension, dtype=complex)
    fwd = np.eye(walk.dimension, dtype=complex)
    bwd = fwd
    for m in range(1, series.k + 1):
        fwd = walk.U @ fwd
        bwd = walk.U.conj().T @ bwd
        acc = acc + series.alphas[series.k + m] * fwd + series.alphas[series.k - m] * bwd
    return acc


def segment_plan(z_total: float, step: float = SEGMENT_Z) -> list[float]:
    """Split ``z_total`` into full steps of ``step`` and one remainder."""
    mag = abs(z_total)
    if mag == 0:
        return []
    full = int(mag // step)
    rest = mag - full * step
    zs = [step] * full
    if rest > 1e-15 * max(mag, 1.0):
        zs.append(rest)
    sgn = 1.0 if z_total > 0 else -1.0
    return [sgn * z for z in zs]


@dataclass
class SegmentRecord:
    z: float
    k: int
    alpha_l1: float
    bound: float


@dataclass
class LcuReport:
    diagonal_shift: float
    lambda1: float
    segments: list[SegmentRecord] = field(default_factory=list)

    @property
    def max_alpha_l1(self) -> float:
        return max((s.alpha_l1 for s in self.segments), default=0.0)


def lcu_evolve(h, psi, t: float, eps: float, sign: int = -1, *, return_report: bool = False):
    """Approximate ``exp(sign * i H t) psi`` with the segmented walk LCU.

    The diagonal is first made nonnegative with ``H + cI`` (``c >= 0``) since
    the walk identity cannot encode negative diagonal entries; the resulting
    global phase is undone at the end.  Each segment gets an error budget of
    ``eps / (number of segments)``.
    """
    h = as_hermitian(h)
    x = as_amplitudes(psi).copy()
    if sign not in (1, -1):
        raise InvalidParams("sign must be +1 or -1")
    if not 0 < eps < 1:
        raise InvalidParams("eps must lie in (0, 1)")
    if h.dim > MAX_WALK_DIM:
        raise DimensionTooLarge(f"dense walk emulation limited to N <= {MAX_WALK_DIM}")
    c = max(0.0, -float(np.min(h.diagonal)))
    hp = h.shifted(-c) if c > 0 else h
    nb = hp.norms
    report = LcuReport(diagonal_shift=c, lambda1=nb.induced1)
    phase = np.exp(-sign * 1j * c * t)
    if t == 0 or nb.induced1 == 0:
        out = StateVector(phase * x)
        return (out, report) if return_report else out
    walk = build_walk(hp, nb.induced1)
    zs = segment_plan(sign * t * nb.induced1)
    eps_seg = eps / len(zs)
    ratio = nb.spectral / nb.induced1
    cache: dict[float, tuple[np.ndarray, SegmentRecord]] = {}
    for z in zs:
        if z not in cache:
            k = truncation_order_for_z(z, ratio, eps_seg)
            series = lcu_series(z, k)
            cache[z] = (compressed_vk(walk, series),
                        SegmentRecord(z, k, series.l1, truncation_error_bound(z, ratio, k)))
        op, rec = cache[z]
        report.segments.append(rec)
        x = op @ x
    out = StateVector(phase * x)
    return (out, report) if return_report else out
