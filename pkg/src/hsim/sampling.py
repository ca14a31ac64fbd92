"""Weighted index sampling.

Three samplers, all returning an index with probability proportional to a
nonnegative weight:

* :func:`select_stream` makes one pass over a weight stream with O(1) state.
* :class:`SampleQueryTree` stores ``|v_k|^2`` at the leaves of a binary tree
  of partial sums; sampling is a root-to-leaf descent.
* :func:`row_search_sample` descends the implicit binary tree of index
  prefixes given only a prefix-weight function ``w(S(L))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import digamma

from .errors import AllZeroWeights, EmptyTree, InconsistentOracle, ValidationError
from .matrix import HermitianMatrix

PSD = "psd"
GENERAL = "general"


@dataclass(frozen=True)
class SeededRng:
    """Reproducible random stream keyed by ``(master_seed, stream_index)``.

    Backed by the counter-based Philox generator; distinct stream indices give
    independent streams, so trial ``i`` of a Monte Carlo run can be replayed on
    its own.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed & (2**64 - 1),
                                    spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))


def seeded_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return SeededRng(seed, stream).generator()


def select_stream(weights: Iterable[float], rng: np.random.Generator) -> tuple[int, float]:
    """Single-pass SELECT: keep item ``i`` with probability ``a_i / D_i``."""
    total = 0.0
    chosen, chosen_w = -1, 0.0
    for i, a in enumerate(weights):
        a = float(a)
        if a < 0 or not math.isfinite(a):
            raise ValidationError(f"weight {i} is {a}; weights must be finite and >= 0")
        if a == 0:
            continue
        total += a
        if rng.random() * total < a:
            chosen, chosen_w = i, a
    if chosen < 0:
        raise AllZeroWeights("no strictly positive weight in the stream")
    return chosen, chosen_w


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


class SampleQueryTree:
    """Binary tree of squared magnitudes over a complex vector.

    Nodes live in a heap-ordered array: node ``i`` has children ``2i`` and
    ``2i + 1``, leaves occupy ``[L, 2L)`` where ``L`` is the padded leaf
    count.  The raw entries are kept next to the leaves so :meth:`query` is
    exact; :attr:`phases` gives ``v_k / |v_k|`` (1 for zeros).
    """

    def __init__(self, size: int, nodes: np.ndarray, values: np.ndarray):
        self.size = size
        self.leaf_count = values.size
        self.nodes = nodes
        self.values = values

    @classmethod
    def build(cls, values: Sequence[complex]) -> "SampleQueryTree":
        v = np.asarray(values, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValidationError("tree values must be finite")
        n = v.size
        leaves = _next_pow2(max(n, 1))
        nodes = np.zeros(2 * leaves)
        mag = np.abs(v)
        nodes[leaves:leaves + n] = mag * mag
        stored = np.zeros(leaves, dtype=complex)
        stored[:n] = v
        lo = leaves
        while lo > 1:
            hi = lo
            lo //= 2
            nodes[lo:hi] = nodes[2 * lo:2 * hi:2] + nodes[2 * lo + 1:2 * hi:2]
        return cls(n, nodes, stored)

    @property
    def root_weight(self) -> float:
        return float(self.nodes[1])

    @property
    def leaf_weights(self) -> np.ndarray:
        return self.nodes[self.leaf_count:self.leaf_count + self.size]

    @property
    def phases(self) -> np.ndarray:
        mag = np.abs(self.values)
        out = np.ones(self.leaf_count, dtype=complex)
        nz = mag > 0
        out[nz] = self.values[nz] / mag[nz]
        return out

    def query(self, k: int) -> complex:
        if not 0 <= k < self.size:
            raise IndexError(k)
        return complex(self.values[k])

    def update(self, k: int, value: complex) -> None:
        """Overwrite entry ``k`` in place, refreshing the O(log N) ancestors."""
        if not 0 <= k < self.size:
            raise IndexError(k)
        value = complex(value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise ValidationError("tree values must be finite")
        mag = abs(value)
        i = self.leaf_count + k
        self.nodes[i] = mag * mag
        self.values[k] = value
        i //= 2
        while i >= 1:
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1]
            i //= 2

    def sample(self, rng: np.random.Generator) -> int:
        return tree_sample(self, rng)

    def check(self, rtol: float = 1e-12) -> bool:
        """Every internal node equals the sum of its children."""
        lc = self.leaf_count
        if np.any(self.nodes[1:] < 0):
            return False
        parents = self.nodes[1:lc]
        sums = self.nodes[2:2 * lc:2] + self.nodes[3:2 * lc:2]
        return bool(np.all(np.abs(parents - sums) <= rtol * np.maximum(np.abs(parents), 1e-300)))


def build_tree(values: Sequence[complex]) -> SampleQueryTree:
    return SampleQueryTree.build(values)


def tree_sample(tree: SampleQueryTree, rng: np.random.Generator) -> int:
    """Index ``k`` with probability ``|v_k|^2 / ||v||^2``."""
    nodes = tree.nodes
    if not nodes[1] > 0:
        raise EmptyTree("tree has zero total weight")
    q = rng.random() * nodes[1]
    i = 1
    while i < tree.leaf_count:
        left = nodes[2 * i]
        if q < left or nodes[2 * i + 1] == 0:
            i = 2 * i
        else:
            q -= left
            i = 2 * i + 1
    return i - tree.leaf_count


class MatrixSampleQuery:
    """Per-row trees for a Hermitian matrix plus one tree over the row norms.

    Sampling a row index from :attr:`norm_tree` gives probability
    ``||H_j||^2 / ||H||_F^2``; sampling from ``row_trees[j]`` gives column
    ``k`` with probability ``|H_jk|^2 / ||H_j||^2``.
    """

    def __init__(self, h: HermitianMatrix):
        self.dim = h.dim
        self.row_trees = [SampleQueryTree.build(h.row_dense(j)) for j in range(h.dim)]
        self.norm_tree = SampleQueryTree.build(
            np.sqrt([t.root_weight for t in self.row_trees]))

    def entry(self, j: int, k: int) -> complex:
        return self.row_trees[j].query(k)

    def sample_row(self, rng: np.random.Generator) -> int:
        return tree_sample(self.norm_tree, rng)

    def sample_entry(self, j: int, rng: np.random.Generator) -> int:
        return tree_sample(self.row_trees[j], rng)

    @property
    def frobenius_sq(self) -> float:
        return self.norm_tree.root_weight


class RowSearchOracle:
    """Prefix weight function ``w(S(L))`` over ``n``-bit row indices.

    ``weight_fn`` receives the prefix as a tuple of bits (most significant
    first) and returns the total weight of all indices starting with it.
    """

    def __init__(self, n: int, weight_fn: Callable[[tuple[int, ...]], float], mode: str = PSD):
        if n < 0:
            raise ValidationError("n must be >= 0")
        self.n = n
        self.weight_fn = weight_fn
        self.mode = mode
        self.evaluations = 0

    def __call__(self, prefix: tuple[int, ...]) -> float:
        self.evaluations += 1
        return float(self.weight_fn(tuple(prefix)))

    @classmethod
    def from_weights(cls, weights: Sequence[float], mode: str = PSD) -> "RowSearchOracle":
        """Materialise the prefix sums of an explicit weight list.

        The list is zero-padded to a power of two; per-level partial sums are
        computed once and each prefix lookup is O(1).
        """
        w = np.asarray(weights, dtype=float).reshape(-1)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and >= 0")
        size = _next_pow2(max(w.size, 1))
        n = size.bit_length() - 1
        levels = [np.zeros(size)]
        levels[0][:w.size] = w
        while levels[-1].size > 1:
            prev = levels[-1]
            levels.append(prev[0::2] + prev[1::2])
        levels.reverse()  # levels[d] has 2**d entries

        def weight_fn(prefix: tuple[int, ...]) -> float:
            idx = 0
            for b in prefix:
                idx = 2 * idx + b
            return float(levels[len(prefix)][idx])

        return cls(n, weight_fn, mode)

    @classmethod
    def from_matrix(cls, h: HermitianMatrix, mode: str = PSD) -> "RowSearchOracle":
        """``h(i) = H_ii`` in PSD mode, ``||H_{:,i}||^2`` in general mode."""
        if h.dim & (h.dim - 1):
            raise ValidationError(f"row search needs a power-of-two dimension, got {h.dim}")
        if mode == PSD:
            weights = h.diagonal
            if np.any(weights < 0):
                raise ValidationError("PSD mode needs a nonnegative diagonal")
        elif mode == GENERAL:
            weights = h.row_norms_sq
        else:
            raise ValidationError(f"unknown mode {mode!r}")
        return cls.from_weights(weights, mode)

    @classmethod
    def diag_harmonic(cls, n: int) -> "RowSearchOracle":
        """Diagonal ``H_ii = 1/i`` for ``i = 1..2^n`` with O(1) prefix sums.

        The prefix ``L`` covers indices ``a+1 .. b`` (1-based) whose weight is
        the harmonic-number difference ``H_b - H_a = psi(b+1) - psi(a+1)``.
        """
        def weight_fn(prefix: tuple[int, ...]) -> float:
            idx = 0
            for bit in prefix:
                idx = 2 * idx + bit
            span = 1 << (n - len(prefix))
            a, b = idx * span, (idx + 1) * span
            return float(digamma(b + 1) - digamma(a + 1))

        return cls(n, weight_fn, PSD)


def row_search_sample(oracle: RowSearchOracle, rng: np.random.Generator,
                      rtol: float = 1e-10) -> int:
    """Sample row ``j`` with probability ``h(j) / w({0,1}^n)`` by prefix descent.

    At each level the prefix grows by 0 when ``q < w(L0)``, otherwise by 1
    with ``w(L0)`` subtracted from ``q``.
    """
    prefix: tuple[int, ...] = ()
    total = oracle(prefix)
    if not total > 0:
        raise AllZeroWeights("w of the empty prefix is not positive")
    q = rng.random() * total
    w_here = total
    for _ in range(oracle.n):
        w0 = oracle(prefix + (0,))
        w1 = oracle(prefix + (1,))
        if abs(w0 + w1 - w_here) > rtol * max(w_here, 1e-300) or w0 < 0 or w1 < 0:
            raise InconsistentOracle(
                f"w({prefix}) = {w_here!r} but children sum to {w0 + w1!r}")
        if q < w0 or w1 == 0:
            prefix += (0,)
            w_here = w0
        else:
            q -= w0
            prefix += (1,)
            w_here = w1
    idx = 0
    for b in prefix:
        idx = 2 * idx + b
    return idx


def exact_row_search_distribution(oracle: RowSearchOracle) -> np.ndarray:
    """Target probabilities read off the full-length prefixes."""
    n = oracle.n
    w = np.array([oracle(tuple((j >> (n - 1 - d)) & 1 for d in range(n)))
                  for j in range(1 << n)])
    return w / w.sum()


# -- batched draws --------------------------------------------------------
# Each function below runs ``size`` independent copies of the scalar sampler
# in lockstep; the per-draw decision rule is unchanged.

def select_stream_many(weights: Sequence[float], rng: np.random.Generator, size: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite and >= 0")
    chosen = np.full(size, -1, dtype=np.int64)
    total = 0.0
    for i, a in enumerate(w):
        if a == 0:
            continue
        total += a
        take = rng.random(size) * total < a
        chosen[take] = i
    if total == 0:
        raise AllZeroWeights("no strictly positive weight in the stream")
    return chosen


def tree_sample_many(tree: SampleQueryTree, rng: np.random.Generator, size: int) -> np.ndarray:
    nodes = tree.nodes
    if not nodes[1] > 0:
        raise EmptyTree("tree has zero total weight")
    q = rng.random(size) * nodes[1]
    i = np.ones(size, dtype=np.int64)
    while i[0] < tree.leaf_count:
        left = nodes[2 * i]
        go_left = (q < left) | (nodes[2 * i + 1] == 0)
        q = np.where(go_left, q, q - left)
        i = np.where(go_left, 2 * i, 2 * i + 1)
    return i - tree.leaf_count


def row_search_sample_many(oracle: RowSearchOracle, rng: np.random.Generator, size: int,
                           rtol: float = 1e-10) -> np.ndarray:
    """Batched prefix descent; each prefix weight is evaluated at most once."""
    if oracle.n > 20:
        raise ValidationError("batched row search supports n <= 20")
    total = oracle(())
    if not total > 0:
        raise AllZeroWeights("w of the empty prefix is not positive")
    q = rng.random(size) * total
    idx = np.zeros(size, dtype=np.int64)
    w_parent = np.array([total])
    for d in range(oracle.n):
        kids = np.array([oracle(tuple((c >> (d - k)) & 1 for k in range(d + 1)))
                         for c in range(1 << (d + 1))])
        w0, w1 = kids[0::2], kids[1::2]
        bad = np.abs(w0 + w1 - w_parent) > rtol * np.maximum(w_parent, 1e-300)
        if np.any(bad) or np.any(kids < 0):
            raise InconsistentOracle(f"child sums disagree with parents at depth {d}")
        left = w0[idx]
        go_left = (q < left) | (w1[idx] == 0)
        q = np.where(go_left, q, q - left)
        idx = 2 * idx + np.where(go_left, 0, 1)
        w_parent = kids
    return idx
