"""Block Sparse Bayesian Learning, bound-optimization variant (BSBL-BO).

Each block ``x_i`` of the signal gets a zero-mean Gaussian prior with
covariance ``gamma_i * B_i``; the measurements see additive Gaussian noise of
variance ``lam``. Hyperparameters are fitted by Type-II maximum likelihood
and the reconstruction is the posterior mean.

One update cycle, with ``Sigma0 = blockdiag(gamma_i B_i)``:

1. ``C = lam I + Phi Sigma0 Phi^T`` (M x M), factorized by Cholesky.
2. Posterior mean ``mu = Sigma0 Phi^T C^-1 y`` and diagonal covariance
   blocks of ``Sigma0 - Sigma0 Phi^T C^-1 Phi Sigma0``.
3. ``gamma_i <- gamma_i * ||B_i^1/2 h_i|| / sqrt(tr(B_i^1/2 H_i B_i^1/2))``
   with ``h_i = Phi_i^T C^-1 y`` and ``H_i = Phi_i^T C^-1 Phi_i``.
4. Optionally re-estimate one AR(1) correlation coefficient ``r`` pooled
   over the full-size blocks and set every ``B_i`` to ``[r^|j-k|]``.
5. Optionally re-estimate ``lam`` (EM rule).
6. Optionally zero out ``gamma_i`` below a pruning threshold.

The measurements are normalized to unit mean square before iterating, and
the result is scaled back, so the solver is scale-equivariant with the
scale-neutral start ``gamma_i = 1``, ``B_i = I``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import lapack, toeplitz

from . import kernels
from .sensing import SparseBinaryMatrix, generate_matrix
from .signal_io import MultichannelRecording, SegmentedChannel, desegment
from .wavelet import WaveletBasis, effective_sensing, idwt

EPS = 1e-12
AUTO_LAMBDA_FACTOR = 1e-10
LEARN_LAMBDA_INIT = 1e-2


class SingularSystemError(np.linalg.LinAlgError):
    """The M x M system ``C`` lost positive definiteness."""

    def __init__(self, iteration: int, detail: str = ""):
        self.iteration = iteration
        super().__init__(f"C is numerically singular at iteration {iteration}"
                         + (f" ({detail})" if detail else "")
                         + "; lambda too small for this sensing matrix?")


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous blocks of sizes ``h_1 .. h_g`` covering ``0 .. N-1``."""

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(h) for h in self.sizes)
        if not sizes or min(sizes) < 1:
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def N(self) -> int:
        return sum(self.sizes)

    @property
    def g(self) -> int:
        return len(self.sizes)

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)

    def slices(self) -> list:
        return [slice(s, s + h) for s, h in zip(self.starts, self.sizes)]


def uniform_partition(N: int, h: int) -> BlockPartition:
    """``N // h`` blocks of size ``h`` plus a remainder block if needed."""
    if not 1 <= h <= N:
        raise ValueError(f"block size must be in [1, {N}], got {h}")
    sizes = [h] * (N // h)
    if N % h:
        sizes.append(N % h)
    return BlockPartition(tuple(sizes))


@dataclass(frozen=True)
class BsblConfig:
    """Solver settings.

    ``lambda_mode`` is ``"auto"`` (fixed at 1e-10 * mean(y**2), the noiseless
    setting), ``"learn"``, or a positive float used as a fixed noise variance
    in the units of ``y**2``.
    """

    learn_correlation: bool = True
    lambda_mode: Union[str, float] = "auto"
    max_iterations: int = 25
    convergence_tol: float = 1e-4
    prune_threshold: float = 0.0
    correlation_clamp: float = 0.99

    def __post_init__(self):
        mode = self.lambda_mode
        if isinstance(mode, str):
            if mode not in ("auto", "learn"):
                try:
                    mode = float(mode)
                except ValueError:
                    raise ValueError(f"lambda_mode must be 'auto', 'learn' or a number, got {mode!r}") from None
        if not isinstance(mode, str) and not mode > 0:
            raise ValueError(f"fixed lambda must be positive, got {mode}")
        object.__setattr__(self, "lambda_mode", mode)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be nonnegative")
        if not 0 < self.correlation_clamp < 1:
            raise ValueError("correlation_clamp must lie in (0, 1)")


@dataclass
class BsblState:
    """Solver state after an update cycle (in the caller's units)."""

    gamma: np.ndarray
    B: list
    lam: float
    mu: np.ndarray
    Sigma_blocks: list
    iteration: int
    r: float = 0.0


@dataclass
class ReconstructionResult:
    x_hat: np.ndarray
    iterations_used: int
    final_state: BsblState
    converged: bool


def ar1_toeplitz(r: float, h: int) -> np.ndarray:
    """AR(1) correlation matrix ``[r ** |j - k|]`` of size h."""
    return toeplitz(r ** np.arange(h))


class _SparseOperator:
    """Phi as per-column row lists; products go through the compiled kernels."""

    def __init__(self, phi: SparseBinaryMatrix):
        self.M, self.N = phi.shape
        self.idx = phi.columns
        self.dense_T = np.ascontiguousarray(phi.to_dense().T)

    def apply(self, X):
        return kernels.scatter_rows(self.idx, X, self.M)

    def adjoint(self, Z):
        return kernels.gather_rows(self.idx, Z)

    def block_gram(self, P, starts, h):
        return kernels.block_gram(self.idx, P, starts, h)


class _DenseOperator:
    def __init__(self, A):
        self.A = np.ascontiguousarray(A, dtype=np.float64)
        self.M, self.N = self.A.shape
        self.dense_T = np.ascontiguousarray(self.A.T)

    def apply(self, X):
        return self.A @ X

    def adjoint(self, Z):
        return self.A.T @ Z

    def block_gram(self, P, starts, h):
        cols = starts[:, None] + np.arange(h)
        return np.matmul(P[cols], np.transpose(self.A[:, cols], (1, 0, 2)))


def _operator(phi):
    if isinstance(phi, SparseBinaryMatrix):
        return _SparseOperator(phi)
    return _DenseOperator(phi)


class _Group:
    """Blocks sharing one size; they also share one correlation matrix."""

    def __init__(self, h, block_ids, starts):
        self.h = h
        self.ids = np.asarray(block_ids, dtype=np.int64)
        self.starts = np.ascontiguousarray(starts, dtype=np.int64)
        self.cols = self.starts[:, None] + np.arange(h)
        self.B = np.eye(h)


def _groups(partition: BlockPartition):
    by_size = {}
    for i, (s, h) in enumerate(zip(partition.starts, partition.sizes)):
        by_size.setdefault(h, []).append((i, s))
    return [_Group(h, [i for i, _ in members], [s for _, s in members])
            for h, members in sorted(by_size.items(), reverse=True)]


def _inverse_spd(C, iteration):
    chol, info = lapack.dpotrf(C, lower=0, clean=1, overwrite_a=0)
    if info != 0:
        raise SingularSystemError(iteration, f"Cholesky info={info}")
    inv, info = lapack.dpotri(chol, lower=0, overwrite_c=1)
    if info != 0:
        raise SingularSystemError(iteration, f"inversion info={info}")
    inv = np.triu(inv)
    inv += np.triu(inv, 1).T
    return inv


def reconstruct(y, phi, partition: BlockPartition, config: BsblConfig = BsblConfig()) -> ReconstructionResult:
    """Recover ``x`` from ``y = phi @ x`` with BSBL-BO.

    Parameters
    ----------
    y : array_like, shape (M,)
        Compressed measurements.
    phi : SparseBinaryMatrix or ndarray, shape (M, N)
        Sensing operator. Dense arrays are used for transformed-domain
        reconstruction (``Omega = Phi Psi``).
    partition : BlockPartition
        Block structure over the N unknowns; need not match the true one.
    config : BsblConfig

    Raises
    ------
    ValueError
        On dimension mismatch.
    SingularSystemError
        If ``C`` cannot be factorized; the exception records the iteration.
    """
    op = _operator(phi)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != op.M:
        raise ValueError(f"y has length {y.size}, sensing operator has {op.M} rows")
    if partition.N != op.N:
        raise ValueError(f"partition covers {partition.N} entries, sensing operator has {op.N} columns")
    g, N = partition.g, op.N
    groups = _groups(partition)

    scale = float(np.sqrt(np.mean(y ** 2)))
    if scale == 0.0:
        state = BsblState(np.zeros(g), [np.eye(h) for h in partition.sizes], 0.0, np.zeros(N),
                          [np.zeros((h, h)) for h in partition.sizes], 0)
        return ReconstructionResult(np.zeros(N), 0, state, True)
    yn = y / scale
    mode = config.lambda_mode
    if mode == "auto":
        lam = AUTO_LAMBDA_FACTOR
    elif mode == "learn":
        lam = LEARN_LAMBDA_INIT
    else:
        lam = float(mode) / scale ** 2

    gamma = np.ones(g)
    r = 0.0
    mu = np.zeros(N)
    sigma = [None] * len(groups)
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        # step 1: C = lam I + Phi Sigma0 Phi^T
        Q = np.empty((N, op.M))
        for grp in groups:
            gam = gamma[grp.ids][:, None, None]
            Q[grp.cols.ravel()] = (gam * np.matmul(grp.B, op.dense_T[grp.cols])).reshape(-1, op.M)
        C = op.apply(Q)
        C[np.diag_indices_from(C)] += lam
        Cinv = _inverse_spd(C, iteration)

        # step 2: posterior moments, block by block
        P = op.adjoint(Cinv)          # Phi^T C^-1, (N, M)
        hvec = P @ yn                 # Phi^T C^-1 y
        gamma_old = gamma.copy()
        gamma_new = gamma.copy()
        pooled = None
        for gi, grp in enumerate(groups):
            gam = gamma_old[grp.ids]
            H = op.block_gram(P, grp.starts, grp.h)
            hb = hvec[grp.cols]
            Bh = hb @ grp.B                                   # B symmetric
            mu_b = gam[:, None] * Bh
            mu[grp.cols] = mu_b
            BHB = np.matmul(np.matmul(grp.B, H), grp.B)
            Sig = gam[:, None, None] * grp.B - (gam ** 2)[:, None, None] * BHB
            sigma[gi] = Sig

            # step 3: bound-optimization gamma rule
            num = np.sqrt(np.maximum(np.einsum("bi,bi->b", hb, Bh), 0.0))
            den = np.sqrt(np.maximum(np.einsum("bij,ji->b", H, grp.B), 0.0))
            ratio = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
            gamma_new[grp.ids] = gam * ratio

            if config.learn_correlation and gi == 0:
                live = gam > 0
                if np.any(live):
                    cov = (Sig[live] + mu_b[live][:, :, None] * mu_b[live][:, None, :]) / gam[live][:, None, None]
                    pooled = cov.sum(axis=0)

        prior_B = [grp.B for grp in groups]

        # step 4: shared AR(1) correlation from the full-size blocks
        if config.learn_correlation:
            if pooled is not None and groups[0].h > 1:
                diag_mean = np.mean(np.diag(pooled))
                off_mean = np.mean(np.diag(pooled, 1))
                r = off_mean / diag_mean if diag_mean > 0 else 0.0
                clamp = config.correlation_clamp
                r = float(np.clip(r, -clamp, clamp))
            for grp in groups:
                grp.B = ar1_toeplitz(r, grp.h)

        # step 5: EM update of the noise variance
        if mode == "learn":
            resid = yn - op.apply(np.ascontiguousarray(mu[:, None]))[:, 0]
            trace_term = 0.0
            for gi, grp in enumerate(groups):
                gam = gamma_old[grp.ids]
                live = gam > 0
                if np.any(live):
                    Binv = np.linalg.inv(prior_B[gi])
                    trace_term += np.sum(np.einsum("bij,ji->b", sigma[gi][live], Binv) / gam[live])
            lam = max((resid @ resid + lam * (N - trace_term)) / op.M, EPS)

        # step 6: pruning (disabled by default)
        if config.prune_threshold > 0:
            gamma_new[gamma_new < config.prune_threshold] = 0.0

        gamma = gamma_new
        change = np.max(np.abs(gamma - gamma_old) / np.maximum(gamma_old, EPS))
        if change < config.convergence_tol:
            converged = True
            break

    sigma_blocks = [None] * g
    B_blocks = [None] * g
    for gi, grp in enumerate(groups):
        for j, b in enumerate(grp.ids):
            sigma_blocks[b] = sigma[gi][j] * scale ** 2
            B_blocks[b] = grp.B
    state = BsblState(gamma * scale ** 2, B_blocks, lam * scale ** 2, mu * scale, sigma_blocks, iteration, r)
    return ReconstructionResult(mu * scale, iteration, state, converged)


def posterior_covariance_check(state: BsblState, tol: float = 1e-10) -> dict:
    """Smallest eigenvalue of every posterior block and correlation matrix.

    Posterior block eigenvalues are also reported relative to the block's
    prior scale ``gamma_i * ||B_i||``; the state is healthy when every
    relative value and every ``B_i`` eigenvalue is ``>= -tol``. In the
    noiseless setting ``C`` is nearly singular (condition ~ 1 / lambda) and
    the subtraction ``Sigma0 - Sigma0 Phi^T C^-1 Phi Sigma0`` loses that
    many digits, so values of order ``cond(C) * eps`` are rounding.
    """
    sig, rel = [], []
    for S, g, B in zip(state.Sigma_blocks, state.gamma, state.B):
        ev = np.linalg.eigvalsh((S + S.T) / 2) if S.size else np.zeros(1)
        sig.append(float(ev.min()))
        prior = float(g) * float(np.linalg.eigvalsh(B).max()) if B.size else 0.0
        rel.append(float(ev.min()) / prior if prior > 0 else (0.0 if ev.min() >= 0 else -np.inf))
    bmin = [float(np.linalg.eigvalsh(B).min()) for B in state.B]
    return {
        "sigma_min_eig": sig,
        "sigma_min_eig_relative": rel,
        "B_min_eig": bmin,
        "healthy": bool(min(rel, default=0.0) >= -tol and min(bmin, default=1.0) >= -tol),
    }


def reconstruct_windows(windows_y, phi, partition, config=BsblConfig()):
    """Reconstruct each row of an (n_windows, M) array; returns (n_windows, N)."""
    windows_y = np.atleast_2d(np.asarray(windows_y, dtype=np.float64))
    N = partition.N
    out = np.empty((windows_y.shape[0], N))
    for i, yw in enumerate(windows_y):
        out[i] = reconstruct(yw, phi, partition, config).x_hat
    return out


def reconstruct_recording(payloads, block_size: int, config: BsblConfig = BsblConfig(),
                          sampling_rate_hz: float = 250.0, domain: str = "time",
                          wavelet_levels=None) -> MultichannelRecording:
    """Rebuild a recording from one payload per channel.

    Phi is regenerated from each payload descriptor. ``domain="wavelet"``
    solves for Daubechies-4 coefficients through ``Omega = Phi Psi`` and maps
    back with the inverse transform.
    """
    if not payloads:
        raise ValueError("no payloads given")
    if domain not in ("time", "wavelet"):
        raise ValueError(f"domain must be 'time' or 'wavelet', got {domain!r}")
    ordered = sorted(payloads, key=lambda p: p.channel)
    N = ordered[0].N
    if any(p.N != N for p in ordered):
        raise ValueError("all payloads must share the window length N")
    partition = uniform_partition(N, block_size)
    matrices = {}
    channels = []
    for p in ordered:
        key = (p.seed, p.M, p.N, p.d)
        if key not in matrices:
            phi = generate_matrix(p.M, p.N, p.d, p.seed, max_retries=0)
            assert phi.seed == p.seed and phi.descriptor() == {"seed": p.seed, "M": p.M, "N": p.N, "d": p.d}
            if domain == "wavelet":
                basis = WaveletBasis(N, wavelet_levels)
                matrices[key] = (effective_sensing(phi, basis), basis)
            else:
                matrices[key] = (phi, None)
        op, basis = matrices[key]
        windows = reconstruct_windows(p.segments, op, partition, config)
        if basis is not None:
            windows = idwt(windows, basis)
        channels.append(desegment(SegmentedChannel(windows, N, p.pad_tail)))
    lengths = {c.size for c in channels}
    if len(lengths) != 1:
        raise ValueError(f"channels reconstruct to different lengths: {sorted(lengths)}")
    return MultichannelRecording(np.vstack(channels), sampling_rate_hz)
