"""NumPy implementations of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built, or when ``FECGCS_PURE_PYTHON`` is set.
"""
import numpy as np


def scatter_rows(idx, X, M):
    """Return ``Phi @ X`` for a 0/1 matrix given as per-column row lists.

    ``np.add.at`` is unbuffered and walks ``idx.ravel()`` in order, so each
    output entry accumulates its addends in ascending column order, the same
    order as the compiled loop.
    """
    out = np.zeros((M, X.shape[1]), dtype=np.float64)
    np.add.at(out, idx.ravel(), np.repeat(X, idx.shape[1], axis=0))
    return out


def gather_rows(idx, Z):
    """Return ``Phi.T @ Z``."""
    out = np.zeros((idx.shape[0], Z.shape[1]), dtype=np.float64)
    for k in range(idx.shape[1]):
        out += Z[idx[:, k]]
    return out


def block_gram(idx, P, starts, h):
    """Diagonal (h x h) blocks of ``P @ Phi`` at the given block starts."""
    d = idx.shape[1]
    out = np.empty((len(starts), h, h), dtype=np.float64)
    for b, s in enumerate(starts):
        rows = P[s:s + h]
        cols = idx[s:s + h]
        acc = np.zeros((h, h))
        for k in range(d):
            acc += rows[:, cols[:, k]]
        out[b] = acc
    return out


def _periodic_taps(L, taps):
    return (2 * np.arange(L // 2)[:, None] + np.arange(taps)[None, :]) % L


def dwt_step(x, lo, hi):
    """One periodized analysis level applied to every row of ``x``."""
    pos = _periodic_taps(x.shape[1], len(lo))
    windows = x[:, pos]
    return windows @ lo, windows @ hi


def idwt_step(approx, detail, lo, hi):
    """Inverse of ``dwt_step``."""
    R, half = approx.shape
    L = 2 * half
    pos = _periodic_taps(L, len(lo))
    contrib = approx[:, :, None] * lo + detail[:, :, None] * hi
    out = np.zeros((R, L), dtype=np.float64)
    for k in range(len(lo)):
        np.add.at(out, (slice(None), pos[:, k]), contrib[:, :, k])
    return out
