"""Random test instances: matrices and states used by the CLI, scripts and tests."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParams
from .matrix import HermitianMatrix, StateVector


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def psd_lowrank(dim: int, rank: int, rng: np.random.Generator,
                trace: float | None = 1.0) -> HermitianMatrix:
    """``G G^H`` with ``G`` of shape ``dim x rank``, optionally rescaled to ``trace``."""
    if not 1 <= rank <= dim:
        raise InvalidParams(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    g = _complex_normal(rng, (dim, rank))
    h = g @ g.conj().T
    if trace is not None:
        h *= trace / np.trace(h).real
    return HermitianMatrix.from_dense(h, symmetrize=True)


def hermitian(dim: int, rng: np.random.Generator, spectral_norm: float | None = 1.0,
              rank: int | None = None) -> HermitianMatrix:
    """Dense random Hermitian matrix; with ``rank`` set, an indefinite rank-``r`` one."""
    if dim < 1:
        raise InvalidParams("dim must be >= 1")
    if rank is None:
        g = _complex_normal(rng, (dim, dim))
        h = (g + g.conj().T) / 2
    else:
        if not 1 <= rank <= dim:
            raise InvalidParams(f"need 1 <= rank <= dim, got {rank}")
        q, _ = np.linalg.qr(_complex_normal(rng, (dim, rank)))
        h = (q * rng.normal(size=rank)) @ q.conj().T
    if spectral_norm is not None:
        h *= spectral_norm / np.max(np.abs(np.linalg.eigvalsh((h + h.conj().T) / 2)))
    return HermitianMatrix.from_dense(h, symmetrize=True)


def sparse_hermitian(dim: int, sparsity: int, rng: np.random.Generator,
                     spectral_norm: float | None = None) -> HermitianMatrix:
    """Hermitian matrix with at most ``sparsity`` nonzeros per row (diagonal included)."""
    if not 1 <= sparsity <= dim:
        raise InvalidParams(f"need 1 <= sparsity <= dim, got {sparsity}")
    deg = np.ones(dim, dtype=int)
    cells: dict[tuple[int, int], complex] = {(j, j): rng.normal() for j in range(dim)}
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    for p in rng.permutation(len(pairs)):
        i, j = pairs[p]
        if deg[i] < sparsity and deg[j] < sparsity:
            cells[(i, j)] = complex(rng.normal(), rng.normal())
            deg[i] += 1
            deg[j] += 1
    if spectral_norm is not None:
        h = HermitianMatrix.from_coo(dim, [(r, c, v) for (r, c), v in cells.items()])
        scale = spectral_norm / h.norms.spectral
        cells = {k: v * scale for k, v in cells.items()}
    return HermitianMatrix.from_coo(dim, [(r, c, v) for (r, c), v in cells.items()])


def diag_harmonic(n: int, sparse: bool = True) -> HermitianMatrix:
    """``H_ii = 1/i`` for ``i = 1..2^n`` (row ``j`` holds ``1/(j+1)``)."""
    dim = 1 << n
    return HermitianMatrix.from_coo(dim, [(j, j, 1.0 / (j + 1)) for j in range(dim)], sparse=sparse)


def random_state(dim: int, rng: np.random.Generator) -> StateVector:
    return StateVector(_complex_normal(rng, dim), normalize=True)


def sparse_state(dim: int, q: int, rng: np.random.Generator) -> StateVector:
    """Unit vector with exactly ``q`` nonzero amplitudes."""
    if not 1 <= q <= dim:
        raise InvalidParams(f"need 1 <= q <= dim, got q={q}")
    a = np.zeros(dim, dtype=complex)
    pos = rng.choice(dim, size=q, replace=False)
    vals = _complex_normal(rng, q)
    vals[np.abs(vals) == 0] = 1.0
    a[pos] = vals
    return StateVector(a, normalize=True)
