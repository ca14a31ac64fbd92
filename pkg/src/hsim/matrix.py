"""Hermitian matrices, state vectors, norms and a Jacobi eigensolver.

Matrices are immutable once built.  Storage is either a dense complex grid or
per-row sorted ``(columns, values)`` pairs; every algorithm in the package
reads rows, entries and diagonals through the same accessors so the two
storage kinds are interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    NonConvergence,
    NotHermitian,
    ValidationError,
)

HERMITIAN_RTOL = 1e-12
MAX_EIGEN_DIM = 4096
_TINY = np.finfo(float).tiny


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class HermitianMatrix:
    """Complex Hermitian operator with dense or sparse-row storage.

    Build through :meth:`from_dense`, :meth:`from_coo` or :meth:`from_rows`.
    """

    def __init__(self, dim: int, dense: np.ndarray | None = None,
                 rows: tuple[tuple[np.ndarray, np.ndarray], ...] | None = None):
        if (dense is None) == (rows is None):
            raise ValidationError("exactly one of dense / rows must be given")
        self.dim = int(dim)
        self._dense = dense
        self._rows = rows

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_dense(cls, data, *, symmetrize: bool = False, sparse: bool = False,
                   rtol: float = HERMITIAN_RTOL) -> "HermitianMatrix":
        a = np.array(data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValidationError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("matrix contains NaN or Inf")
        if symmetrize:
            a = (a + a.conj().T) / 2
        else:
            _check_hermitian(a, rtol)
            # exact symmetry on the stored copy; the check above bounds the change
            a = (a + a.conj().T) / 2
        np.fill_diagonal(a, a.diagonal().real)
        if sparse:
            rows = []
            for j in range(a.shape[0]):
                cols = np.flatnonzero(a[j])
                rows.append((_frozen(cols.astype(np.int64)), _frozen(a[j, cols].copy())))
            return cls(a.shape[0], rows=tuple(rows))
        return cls(a.shape[0], dense=_frozen(a))

    @classmethod
    def from_coo(cls, dim: int, entries: Iterable[tuple[int, int, complex]], *,
                 mirror: bool = True, sparse: bool = True,
                 rtol: float = HERMITIAN_RTOL) -> "HermitianMatrix":
        """Build from ``(row, col, value)`` triples.

        With ``mirror=True`` the triples are the upper triangle plus diagonal
        and the lower triangle is filled in by conjugation.  Duplicated
        coordinates are rejected.
        """
        if dim <= 0:
            raise ValidationError("dim must be positive")
        cells: dict[tuple[int, int], complex] = {}
        for r, c, v in entries:
            r, c, v = int(r), int(c), complex(v)
            if not (0 <= r < dim and 0 <= c < dim):
                raise ValidationError(f"entry ({r}, {c}) outside a {dim}x{dim} matrix")
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValidationError("matrix contains NaN or Inf")
            if mirror and r > c:
                raise ValidationError(f"mirrored COO expects upper-triangle entries, got ({r}, {c})")
            if (r, c) in cells:
                raise ValidationError(f"duplicate entry ({r}, {c})")
            cells[(r, c)] = v
        if mirror:
            for (r, c), v in list(cells.items()):
                if r == c:
                    if abs(v.imag) > rtol * max(abs(v), 1.0):
                        raise NotHermitian(f"diagonal entry ({r}, {r}) is not real")
                    cells[(r, c)] = complex(v.real)
                else:
                    cells[(c, r)] = v.conjugate()
        else:
            scale = max((abs(v) for v in cells.values()), default=0.0)
            for (r, c), v in cells.items():
                w = cells.get((c, r), 0j)
                if abs(v - w.conjugate()) > rtol * scale:
                    raise NotHermitian(f"entries ({r}, {c}) and ({c}, {r}) are not conjugate")
        per_row: list[list[tuple[int, complex]]] = [[] for _ in range(dim)]
        for (r, c), v in cells.items():
            if v != 0:
                per_row[r].append((c, v))
        rows = []
        for items in per_row:
            items.sort()
            cols = np.array([c for c, _ in items], dtype=np.int64)
            vals = np.array([v for _, v in items], dtype=complex)
            rows.append((_frozen(cols), _frozen(vals)))
        h = cls(dim, rows=tuple(rows))
        if not sparse:
            return cls(dim, dense=_frozen(h.to_dense()))
        return h

    @classmethod
    def from_rows(cls, dim: int, rows: Sequence[Sequence[tuple[int, complex]]], **kw) -> "HermitianMatrix":
        """Build from a full list of rows, each a list of ``(col, value)`` pairs."""
        triples = [(j, c, v) for j, row in enumerate(rows) for c, v in row]
        return cls.from_coo(dim, triples, mirror=False, **kw)

    # -- accessors --------------------------------------------------------

    @property
    def is_sparse(self) -> bool:
        return self._rows is not None

    def to_dense(self) -> np.ndarray:
        """Return a fresh writable dense copy."""
        if self._dense is not None:
            return self._dense.copy()
        a = np.zeros((self.dim, self.dim), dtype=complex)
        for j, (cols, vals) in enumerate(self._rows):
            a[j, cols] = vals
        return a

    @cached_property
    def dense(self) -> np.ndarray:
        """Read-only dense view."""
        if self._dense is not None:
            return self._dense
        return _frozen(self.to_dense())

    def row(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero ``(columns, values)`` of row ``j``, sorted by column."""
        if self._rows is not None:
            return self._rows[j]
        r = self._dense[j]
        cols = np.flatnonzero(r)
        return cols, r[cols]

    def row_dense(self, j: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense[j].copy()
        out = np.zeros(self.dim, dtype=complex)
        cols, vals = self._rows[j]
        out[cols] = vals
        return out

    def column(self, k: int) -> np.ndarray:
        """Dense column ``H[:, k]`` (the conjugate of row ``k``)."""
        return self.row_dense(k).conj()

    def entry(self, j: int, k: int) -> complex:
        if self._dense is not None:
            return complex(self._dense[j, k])
        cols, vals = self._rows[j]
        pos = np.searchsorted(cols, k)
        if pos < len(cols) and cols[pos] == k:
            return complex(vals[pos])
        return 0j

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self._dense is not None:
            return self._dense[np.ix_(rows, cols)].copy()
        out = np.empty((len(rows), len(cols)), dtype=complex)
        for a, j in enumerate(rows):
            out[a] = self.row_dense(int(j))[cols]
        return out

    @cached_property
    def diagonal(self) -> np.ndarray:
        if self._dense is not None:
            d = self._dense.diagonal().real.copy()
        else:
            d = np.array([self.entry(j, j).real for j in range(self.dim)])
        return _frozen(d)

    @cached_property
    def row_norms_sq(self) -> np.ndarray:
        """Squared Euclidean norm of every row (equal to the column norms)."""
        if self._dense is not None:
            r = np.sum(np.abs(self._dense) ** 2, axis=1)
        else:
            r = np.array([np.sum(np.abs(v) ** 2) for _, v in self._rows])
        return _frozen(r)

    @cached_property
    def row_sparsity(self) -> int:
        if self._rows is not None:
            return max(len(c) for c, _ in self._rows)
        return int(np.max(np.count_nonzero(self._dense, axis=1)))

    @cached_property
    def norms(self) -> "NormBundle":
        return norms(self)

    def shifted(self, alpha: float) -> "HermitianMatrix":
        """Return ``H - alpha * I`` with the same storage kind."""
        a = self.to_dense()
        a[np.diag_indices(self.dim)] -= alpha
        return HermitianMatrix.from_dense(a, sparse=self.is_sparse)

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"HermitianMatrix(dim={self.dim}, {kind}, s={self.row_sparsity})"


def _check_hermitian(a: np.ndarray, rtol: float) -> None:
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    dev = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if dev > rtol * scale:
        raise NotHermitian(f"max |H - H^H| = {dev:.3e} exceeds {rtol:g} * max|H| = {rtol * scale:.3e}")


def as_hermitian(h) -> HermitianMatrix:
    if isinstance(h, HermitianMatrix):
        return h
    return HermitianMatrix.from_dense(h)


class StateVector:
    """Complex amplitude vector with nonzero count metadata."""

    __slots__ = ("amplitudes", "normalized")

    def __init__(self, amplitudes, *, normalize: bool = False, check_normalized: bool = False):
        a = np.array(amplitudes, dtype=complex).reshape(-1)
        if a.size == 0:
            raise ValidationError("empty state vector")
        if not np.all(np.isfinite(a)):
            raise ValidationError("state contains NaN or Inf")
        if normalize:
            n = np.linalg.norm(a)
            if n == 0:
                raise ValidationError("cannot normalize the zero vector")
            a = a / n
        self.normalized = bool(normalize or check_normalized)
        if self.normalized and abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValidationError(f"state norm {np.linalg.norm(a):.15f} is not 1")
        self.amplitudes = _frozen(a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.amplitudes))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes.astype(dtype) if dtype is not None else self.amplitudes.copy()

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"StateVector(dim={self.dim}, nnz={self.nnz})"


def as_amplitudes(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.amplitudes
    return np.asarray(x, dtype=complex).reshape(-1)


@dataclass(frozen=True)
class NormBundle:
    spectral: float
    frobenius: float
    induced1: float
    trace: float
    max_abs: float


def norms(h: HermitianMatrix) -> NormBundle:
    """Spectral, Frobenius, max-row-sum, trace and max-entry norms of ``h``."""
    h = as_hermitian(h)
    evals, _ = hermitian_eigendecompose(h)
    if h.is_sparse:
        vals = [v for _, v in h._rows]
        induced1 = max(float(np.sum(np.abs(v))) for v in vals)
        max_abs = max((float(np.max(np.abs(v))) for v in vals if v.size), default=0.0)
    else:
        absd = np.abs(h.dense)
        induced1 = float(np.max(absd.sum(axis=1)))
        max_abs = float(absd.max())
    return NormBundle(
        spectral=float(np.max(np.abs(evals))),
        frobenius=float(math.sqrt(np.sum(h.row_norms_sq))),
        induced1=induced1,
        trace=float(np.sum(h.diagonal)),
        max_abs=max_abs,
    )


def matvec(h: HermitianMatrix, x) -> StateVector:
    """Exact product ``H x``.

    Sparse matrices iterate over the nonzeros of ``x`` only, using that column
    ``k`` of a Hermitian matrix is the conjugate of row ``k``.
    """
    h = as_hermitian(h)
    a = as_amplitudes(x)
    if a.size != h.dim:
        raise DimensionMismatch(f"matrix dim {h.dim} vs vector dim {a.size}")
    if not h.is_sparse:
        return StateVector(h.dense @ a)
    out = np.zeros(h.dim, dtype=complex)
    for k in np.flatnonzero(a):
        cols, vals = h._rows[k]
        out[cols] += a[k] * vals.conj()
    return StateVector(out)


# -- eigendecomposition --------------------------------------------------

def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint index pairings covering every pair once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array([players[i] for i in range(m // 2)])
        q = np.array([players[m - 1 - i] for i in range(m // 2)])
        keep = (p < n) & (q < n)
        rounds.append((p[keep], q[keep]))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 60):
    """Cyclic complex Jacobi with round-robin ordering.

    Each round rotates a set of disjoint ``(p, q)`` pairs at once; rotations on
    disjoint pairs commute, so this is the ordinary cyclic method with the
    per-round work vectorised.  Stops once the off-diagonal Frobenius mass is
    at most ``tol * ||A||_F``.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    fro = float(np.linalg.norm(a))
    if n == 1 or fro == 0.0:
        return a.diagonal().real.copy(), v
    rounds = _round_robin(n)
    target = tol * fro

    mask = ~np.eye(n, dtype=bool)

    def offdiag() -> float:
        return float(np.linalg.norm(a[mask]))

    for _ in range(max_sweeps):
        if offdiag() <= target:
            break
        for p, q in rounds:
            apq = a[p, q]
            mag = np.abs(apq)
            # subnormal entries overflow apq / mag; they cannot move eigenvalues, so drop them
            tiny = (mag > 0) & (mag < _TINY)
            if np.any(tiny):
                a[p[tiny], q[tiny]] = 0
                a[q[tiny], p[tiny]] = 0
            act = mag >= _TINY
            if not np.any(act):
                continue
            p, q, apq, mag = p[act], q[act], apq[act], mag[act]
            app = a[p, p].real
            aqq = a[q, q].real
            ph = np.conj(apq / mag)
            tau = (aqq - app) / (2 * mag)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1 / np.sqrt(1 + t * t)
            s = t * c
            w_pp, w_pq, w_qp, w_qq = c, s, -s * ph, c * ph

            cp, cq = a[:, p].copy(), a[:, q]
            a[:, p] = cp * w_pp + cq * w_qp
            a[:, q] = cp * w_pq + cq * w_qq
            rp, rq = a[p, :].copy(), a[q, :]
            a[p, :] = np.conj(w_pp)[:, None] * rp + np.conj(w_qp)[:, None] * rq
            a[q, :] = np.conj(w_pq)[:, None] * rp + np.conj(w_qq)[:, None] * rq
            a[p, q] = 0
            a[q, p] = 0
            a[p, p] = a[p, p].real
            a[q, q] = a[q, q].real

            vp, vq = v[:, p].copy(), v[:, q]
            v[:, p] = vp * w_pp + vq * w_qp
            v[:, q] = vp * w_pq + vq * w_qq
    else:
        if offdiag() > target:
            raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps "
                                 f"(off-diagonal {offdiag():.3e} > {target:.3e})")
    w = a.diagonal().real
    order = np.argsort(w, kind="stable")
    return w[order].copy(), v[:, order].copy()


def hermitian_eigendecompose(h, tol: float = 1e-13, *, method: str = "jacobi",
                             max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and unitary eigenvectors (as columns).

    ``method="jacobi"`` runs the in-house cyclic Jacobi solver;
    ``method="lapack"`` defers to :func:`numpy.linalg.eigh`.
    """
    a = h.dense if isinstance(h, HermitianMatrix) else np.asarray(h, dtype=complex)
    if a.shape[0] > MAX_EIGEN_DIM:
        raise DimensionTooLarge(f"dim {a.shape[0]} exceeds {MAX_EIGEN_DIM}")
    if method == "jacobi":
        return jacobi_eigh(a, tol=tol, max_sweeps=max_sweeps)
    if method == "lapack":
        return np.linalg.eigh(a)
    raise ValueError(f"unknown method {method!r}")


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value of an arbitrary (square or not) matrix."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    gram = a.conj().T @ a if a.shape[0] >= a.shape[1] else a @ a.conj().T
    evals, _ = hermitian_eigendecompose((gram + gram.conj().T) / 2)
    return float(math.sqrt(max(evals[-1], 0.0)))


def pinv_hermitian(b: np.ndarray, rtol: float | None = None) -> np.ndarray:
    """Pseudoinverse of a Hermitian matrix by eigenvalue cutoff.

    Eigenvalues with ``|lambda| <= rtol * max|lambda|`` are dropped; the
    default cutoff is ``M * 1e-14`` for an ``M x M`` input.
    """
    b = np.asarray(b, dtype=complex)
    m = b.shape[0]
    if rtol is None:
        rtol = m * 1e-14
    evals, vecs = hermitian_eigendecompose((b + b.conj().T) / 2)
    lam_max = float(np.max(np.abs(evals))) if evals.size else 0.0
    keep = np.abs(evals) > rtol * lam_max
    if lam_max == 0 or not np.any(keep):
        return np.zeros_like(b)
    vk = vecs[:, keep]
    return (vk / evals[keep]) @ vk.conj().T
