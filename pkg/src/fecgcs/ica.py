"""Band-pass filtering, whitening, deflation FastICA and component matching."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .signal_io import MultichannelRecording

DEFAULT_BAND = (1.75, 100.0)
FILTER_ORDER = 4
EIG_RELATIVE_FLOOR = 1e-12


class IcaError(ValueError):
    """Input unsuitable for ICA (too few channels, rank too low, ...)."""


def bandpass(rec: MultichannelRecording, low_hz: float = DEFAULT_BAND[0],
             high_hz: float = DEFAULT_BAND[1]) -> MultichannelRecording:
    """Zero-phase Butterworth band-pass, then per-channel mean removal.

    The 4th-order design is run forward and backward (``sosfiltfilt``),
    which squares the magnitude response and cancels the phase.
    """
    fs = rec.sampling_rate_hz
    if not 0 < low_hz < high_hz < fs / 2:
        raise ValueError(f"band ({low_hz}, {high_hz}) must satisfy 0 < low < high < {fs / 2}")
    sos = butter(FILTER_ORDER, [low_hz, high_hz], btype="bandpass", output="sos", fs=fs)
    out = sosfiltfilt(sos, rec.data, axis=1)
    out = out - out.mean(axis=1, keepdims=True)
    return MultichannelRecording(out, fs)


@dataclass(frozen=True)
class Whitened:
    data: np.ndarray
    whitener: np.ndarray
    mean: np.ndarray
    dropped: int


def whiten(x) -> Whitened:
    """PCA whitening of a channels x samples array (or recording).

    ``whitener = diag(lambda)^-1/2 E^T`` from the eigendecomposition of the
    sample covariance of the centered data. Directions whose eigenvalue is
    below ``1e-12 * max`` are dropped; ``dropped`` counts them.
    """
    data = x.data if isinstance(x, MultichannelRecording) else np.asarray(x, dtype=np.float64)
    C, T = data.shape
    if C < 2:
        raise IcaError("whitening needs at least two channels")
    if T <= C:
        raise IcaError("whitening needs more samples than channels")
    mean = data.mean(axis=1, keepdims=True)
    xc = data - mean
    cov = xc @ xc.T / T
    evals, evecs = np.linalg.eigh(cov)
    keep = evals > EIG_RELATIVE_FLOOR * evals.max()
    if keep.sum() < 2:
        raise IcaError("rank below 2 after filtering")
    # descending variance order
    evals, evecs = evals[keep][::-1], evecs[:, keep][:, ::-1]
    W = evecs.T / np.sqrt(evals)[:, None]
    return Whitened(W @ xc, W, mean[:, 0], int(C - keep.sum()))


@dataclass(frozen=True)
class IcaResult:
    components: np.ndarray      # K x samples
    unmixing: np.ndarray        # K x whitened-dim, rows orthonormal
    whitener: np.ndarray        # whitened-dim x channels
    converged: np.ndarray       # per component
    iterations: np.ndarray

    @property
    def k_extracted(self) -> int:
        return self.components.shape[0]

    def separating_matrix(self) -> np.ndarray:
        """Channels-to-components map for centered data."""
        return self.unmixing @ self.whitener


def _fastica_units(Z, k, rng, max_iter, tol):
    n, T = Z.shape
    W = np.zeros((k, n))
    converged = np.zeros(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    for p in range(k):
        w = rng.standard_normal(n)
        w -= W[:p].T @ (W[:p] @ w)
        w /= np.linalg.norm(w)
        for it in range(1, max_iter + 1):
            u = w @ Z
            g = np.tanh(u)
            w_new = (Z @ g) / T - np.mean(1.0 - g * g) * w
            w_new -= W[:p].T @ (W[:p] @ w_new)
            w_new /= np.linalg.norm(w_new)
            done = abs(w_new @ w) > 1.0 - tol
            w = w_new
            if done:
                converged[p] = True
                break
        iters[p] = it
        W[p] = w
    return W, converged, iters


def fastica_deflation(whitened, k: int | None = None, seed: int = 0,
                      max_iter: int = 200, tol: float = 1e-4,
                      whitener=None) -> IcaResult:
    """Deflation-mode FastICA with the tanh contrast.

    Units are estimated one at a time by the fixed-point rule
    ``w <- E[z g(w'z)] - E[g'(w'z)] w`` and Gram-Schmidt orthogonalised
    against earlier units after every step. A unit stops when
    ``|<w_new, w_old>| > 1 - tol``; units that hit ``max_iter`` are kept and
    flagged with ``converged=False``.

    ``whitened`` is either a :class:`Whitened` or an already white array.
    """
    if isinstance(whitened, Whitened):
        Z, whitener = whitened.data, whitened.whitener
    else:
        Z = np.asarray(whitened, dtype=np.float64)
        if whitener is None:
            whitener = np.eye(Z.shape[0])
    n = Z.shape[0]
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise IcaError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    W, converged, iters = _fastica_units(Z, k, rng, max_iter, tol)
    S = W @ Z
    return IcaResult(S, W, np.asarray(whitener), converged, iters)


def extract(rec: MultichannelRecording, k: int | None = None, seed: int = 0,
            band=DEFAULT_BAND, max_iter: int = 200, tol: float = 1e-4) -> IcaResult:
    """Band-pass, whiten and run deflation FastICA on a recording."""
    filtered = bandpass(rec, *band) if band is not None else rec
    return fastica_deflation(whiten(filtered), k=k, seed=seed, max_iter=max_iter, tol=tol)


@dataclass(frozen=True)
class MatchReport:
    pairs: list          # (index in a, index in b, |r|), in matching order
    permutation: list    # permutation[i] = index in b matched to a[i], or -1

    @property
    def correlations(self) -> list:
        return [r for _, _, r in self.pairs]

    def to_dict(self) -> dict:
        return {"pairs": [[int(i), int(j), float(r)] for i, j, r in self.pairs],
                "permutation": [int(p) for p in self.permutation]}


def abs_correlation_matrix(A, B) -> np.ndarray:
    """|Pearson| between every row of A and every row of B."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"sample count mismatch: {A.shape[1]} vs {B.shape[1]}")
    A = A - A.mean(axis=1, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        R = np.abs(A @ B.T) / np.outer(na, nb)
    return np.clip(np.nan_to_num(R, nan=0.0), 0.0, 1.0)


def _rows(x):
    return x.components if isinstance(x, IcaResult) else np.atleast_2d(np.asarray(x, dtype=np.float64))


def match_components(a, b) -> MatchReport:
    """Greedy maximum-|Pearson| matching of rows of ``a`` to rows of ``b``.

    Repeatedly takes the largest remaining entry of the |correlation| matrix
    and removes its row and column. Ties resolve to the lowest indices.
    """
    A, B = _rows(a), _rows(b)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty component set")
    R = abs_correlation_matrix(A, B)
    work = R.copy()
    pairs = []
    perm = [-1] * A.shape[0]
    for _ in range(min(R.shape)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        pairs.append((int(i), int(j), float(R[i, j])))
        perm[i] = int(j)
        work[i, :] = -1.0
        work[:, j] = -1.0
    return MatchReport(pairs, perm)
