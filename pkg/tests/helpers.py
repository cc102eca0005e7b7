"""Shared instance generators for the solver tests and acceptance runs."""
import numpy as np
from scipy.linalg import cholesky, toeplitz

from fecgcs.sensing import generate_matrix
from fecgcs.seeds import derive_seed

SMALL_N, SMALL_M, SMALL_H, SMALL_ACTIVE, SMALL_RHO = 64, 32, 4, 2, 0.9
SMALL_D = 4


def block_sparse_instance(seed, N=SMALL_N, M=SMALL_M, h=SMALL_H, active=SMALL_ACTIVE,
                          rho=SMALL_RHO, d=SMALL_D):
    """Noiseless block-sparse problem with AR(1) blocks.

    Returns (phi, x, y, support) where support lists the nonzero indices.
    """
    rng = np.random.default_rng(derive_seed(seed, 0))
    g = N // h
    blocks = np.sort(rng.choice(g, size=active, replace=False))
    L = cholesky(toeplitz(rho ** np.arange(h)), lower=True)
    x = np.zeros(N)
    for b in blocks:
        x[b * h:(b + 1) * h] = L @ rng.standard_normal(h)
    phi = generate_matrix(M, N, d, derive_seed(seed, 1))
    support = np.concatenate([np.arange(b * h, (b + 1) * h) for b in blocks])
    return phi, x, phi.to_dense() @ x, support


def oracle_least_squares(phi, y, support):
    """Least squares restricted to the true support."""
    A = phi.to_dense()[:, support]
    x = np.zeros(phi.N)
    x[support] = np.linalg.lstsq(A, y, rcond=None)[0]
    return x


def rel_error(x_hat, x):
    return float(np.linalg.norm(x_hat - x) / np.linalg.norm(x))
