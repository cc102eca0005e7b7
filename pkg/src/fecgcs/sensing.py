"""Sparse binary sensing matrices, compression and its arithmetic cost."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

U64 = (1 << 64) - 1
DEFAULT_RANK_RETRIES = 100


class RankError(RuntimeError):
    """No full-row-rank matrix was found within the retry budget."""


@dataclass(frozen=True, eq=False)
class SparseBinaryMatrix:
    """An M x N 0/1 matrix with exactly ``d`` ones in every column.

    ``columns[n]`` holds the sorted row indices of the ones in column ``n``.
    ``seed`` is the seed that produced these columns; ``requested_seed`` is
    the seed originally asked for (they differ after rank retries).
    """

    M: int
    N: int
    d: int
    columns: np.ndarray
    seed: int
    requested_seed: int | None = None

    def __post_init__(self):
        cols = np.ascontiguousarray(self.columns, dtype=np.int64)
        if cols.shape != (self.N, self.d):
            raise ValueError(f"columns must have shape ({self.N}, {self.d}), got {cols.shape}")
        if cols.size and (cols.min() < 0 or cols.max() >= self.M):
            raise ValueError("row index out of range")
        if self.d > 1 and np.any(np.diff(cols, axis=1) <= 0):
            raise ValueError("row indices in each column must be sorted and distinct")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        if self.requested_seed is None:
            object.__setattr__(self, "requested_seed", self.seed)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.N)

    def descriptor(self) -> dict:
        return {"seed": int(self.seed), "M": self.M, "N": self.N, "d": self.d}

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.M, self.N))
        dense[self.columns.ravel(), np.repeat(np.arange(self.N), self.d)] = 1.0
        return dense

    def row_counts(self) -> np.ndarray:
        """Number of ones in each row."""
        return np.bincount(self.columns.ravel(), minlength=self.M)

    def __eq__(self, other):
        if not isinstance(other, SparseBinaryMatrix):
            return NotImplemented
        return (self.shape == other.shape and self.d == other.d
                and np.array_equal(self.columns, other.columns))


def _draw_independent(M: int, N: int, d: int, rng: np.random.Generator) -> np.ndarray:
    # first d entries of a uniform permutation: a uniform d-subset
    perm = np.argsort(rng.random((N, M)), axis=1, kind="stable")
    return perm[:, :d]


def _draw_balanced(M: int, N: int, d: int, rng: np.random.Generator) -> np.ndarray:
    # deal rows from a deck of concatenated random permutations of 0..M-1
    decks = -(-N * d // M)
    deck = np.concatenate([rng.permutation(M) for _ in range(decks)])
    cols = deck[:N * d].reshape(N, d).copy()
    for n in range(N):
        row = cols[n]
        if len(np.unique(row)) == d:
            continue
        # a column straddling two permutations may repeat a row: redraw the
        # repeats uniformly from the rows the column does not use yet
        seen = set()
        for k in range(d):
            if row[k] in seen:
                free = np.setdiff1d(np.arange(M), row)
                row[k] = free[rng.integers(len(free))]
            seen.add(row[k])
    return cols


_DRAWS = {"balanced": _draw_balanced, "independent": _draw_independent}


def generate_matrix(M: int, N: int, d: int, seed: int,
                    max_retries: int = DEFAULT_RANK_RETRIES,
                    method: str = "balanced") -> SparseBinaryMatrix:
    """Draw a full-row-rank sparse binary matrix, deterministically from ``seed``.

    Every column gets ``d`` distinct rows at random locations. With
    ``method="independent"`` each column is an independent uniform d-subset;
    the default ``"balanced"`` deals the rows of consecutive random
    permutations so every row receives about ``d * N / M`` ones. (With
    independent columns, d=2 and a 256 x 512 matrix, about 99% of draws leave
    some row empty and therefore rank deficient.)

    When a draw is rank deficient the seed is incremented (mod 2**64) and the
    draw repeated, up to ``max_retries`` times. Duplicate columns are allowed.

    ``M == N`` is accepted so that a zero compression ratio can be run through
    the same pipeline.
    """
    if not (1 <= d <= M <= N):
        raise ValueError(f"need 1 <= d <= M <= N, got d={d}, M={M}, N={N}")
    if method not in _DRAWS:
        raise ValueError(f"unknown method {method!r}")
    seed = int(seed) & U64
    for attempt in range(max_retries + 1):
        s = (seed + attempt) & U64
        cols = np.sort(_DRAWS[method](M, N, d, np.random.default_rng(s)), axis=1)
        phi = SparseBinaryMatrix(M, N, d, cols, s, requested_seed=seed)
        if np.all(phi.row_counts() > 0) and np.linalg.matrix_rank(phi.to_dense()) == M:
            return phi
    raise RankError(f"no full-rank {M}x{N} matrix with d={d} after {max_retries} retries from seed {seed}")


def compress(phi: SparseBinaryMatrix, x) -> np.ndarray:
    """Return ``y = phi @ x``.

    ``x`` may be a length-N vector or an (n_windows, N) array of windows, in
    which case the result is (n_windows, M). Sums run over each row's columns
    in ascending order, so results equal a naive dense loop bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != phi.N or x.ndim > 2:
        raise ValueError(f"expected trailing length {phi.N}, got shape {x.shape}")
    if x.ndim == 1:
        return kernels.scatter_rows(phi.columns, np.ascontiguousarray(x[:, None]), phi.M)[:, 0]
    return kernels.scatter_rows(phi.columns, np.ascontiguousarray(x.T), phi.M).T.copy()


def adjoint(phi: SparseBinaryMatrix, z) -> np.ndarray:
    """Return ``phi.T @ z`` for a length-M vector or an (M, K) array."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] != phi.M or z.ndim > 2:
        raise ValueError(f"expected leading length {phi.M}, got shape {z.shape}")
    if z.ndim == 1:
        return kernels.gather_rows(phi.columns, np.ascontiguousarray(z[:, None]))[:, 0]
    return kernels.gather_rows(phi.columns, np.ascontiguousarray(z))


@dataclass(frozen=True)
class OpsCount:
    additions: int
    multiplications: int

    def __post_init__(self):
        if self.additions < 0 or self.multiplications < 0:
            raise ValueError("operation counts must be nonnegative")


def compression_ops(phi: SparseBinaryMatrix) -> OpsCount:
    """Additions needed to compute ``phi @ x``; a 0/1 matrix needs no products.

    A row with k ones costs k - 1 additions. For a full-rank matrix every row
    is non-empty and the total is ``d * N - M``.
    """
    counts = phi.row_counts()
    return OpsCount(int(np.sum(np.maximum(counts - 1, 0))), 0)


def compression_ratio(N: int, M: int) -> float:
    """Percentage of samples saved: ``(N - M) / N * 100``."""
    if N <= 0:
        raise ValueError("N must be positive")
    if not 0 < M <= N:
        raise ValueError(f"need 0 < M <= N, got M={M}, N={N}")
    return (N - M) / N * 100.0


def rows_for_cr(N: int, cr: float) -> int:
    """Row count giving compression ratio ``cr``: nearest integer, halves up."""
    if not 0 <= cr < 100:
        raise ValueError(f"compression ratio must be in [0, 100), got {cr}")
    M = math.floor(N * (1.0 - cr / 100.0) + 0.5)
    return min(max(M, 1), N)


def dump_columns(phi: SparseBinaryMatrix) -> str:
    """CSV text with one line per column listing its row indices (audit aid)."""
    return "".join(",".join(str(int(v)) for v in col) + "\n" for col in phi.columns)
