# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every function here has a NumPy twin in ``_kernels_py`` with the same
signature and summation order where it matters (see ``scatter_rows``).
Callers validate shapes and index ranges; these loops trust their input.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def scatter_rows(const cnp.int64_t[:, ::1] idx, const double[:, ::1] X, Py_ssize_t M):
    """Return ``Phi @ X`` for a 0/1 matrix given as per-column row lists.

    ``idx`` has shape (N, d); column ``n`` of Phi has ones at rows
    ``idx[n, :]``. For each output entry the addends are accumulated in
    ascending column order, which makes the result bit-identical to a naive
    dense row-times-vector loop.
    """
    cdef Py_ssize_t N = idx.shape[0]
    cdef Py_ssize_t d = idx.shape[1]
    cdef Py_ssize_t K = X.shape[1]
    cdef Py_ssize_t n, k, j, m
    out = np.zeros((M, K), dtype=np.float64)
    cdef double[:, ::1] Y = out
    with nogil:
        for n in range(N):
            for k in range(d):
                m = idx[n, k]
                for j in range(K):
                    Y[m, j] += X[n, j]
    return out


def gather_rows(const cnp.int64_t[:, ::1] idx, const double[:, ::1] Z):
    """Return ``Phi.T @ Z``: row ``n`` is the sum of ``Z[idx[n, k]]`` over k."""
    cdef Py_ssize_t N = idx.shape[0]
    cdef Py_ssize_t d = idx.shape[1]
    cdef Py_ssize_t K = Z.shape[1]
    cdef Py_ssize_t n, k, j, m
    out = np.zeros((N, K), dtype=np.float64)
    cdef double[:, ::1] Y = out
    with nogil:
        for n in range(N):
            for k in range(d):
                m = idx[n, k]
                for j in range(K):
                    Y[n, j] += Z[m, j]
    return out


def block_gram(const cnp.int64_t[:, ::1] idx, const double[:, ::1] P,
               const cnp.int64_t[::1] starts, Py_ssize_t h):
    """Diagonal blocks of ``P @ Phi`` for contiguous equal-size blocks.

    ``P`` is (N, M). Block ``b`` covers columns ``starts[b] .. starts[b]+h``
    and the result has shape (len(starts), h, h) with
    ``out[b, a, c] = sum_k P[s + a, idx[s + c, k]]``.
    """
    cdef Py_ssize_t nb = starts.shape[0]
    cdef Py_ssize_t d = idx.shape[1]
    cdef Py_ssize_t b, a, c, k, s
    cdef double acc
    out = np.empty((nb, h, h), dtype=np.float64)
    cdef double[:, :, ::1] H = out
    with nogil:
        for b in range(nb):
            s = starts[b]
            for a in range(h):
                for c in range(h):
                    acc = 0.0
                    for k in range(d):
                        acc = acc + P[s + a, idx[s + c, k]]
                    H[b, a, c] = acc
    return out


def dwt_step(const double[:, ::1] x, const double[::1] lo, const double[::1] hi):
    """One periodized analysis level applied to every row of ``x``.

    Returns ``(approx, detail)``, each of shape (rows, L // 2), with
    ``approx[r, i] = sum_k lo[k] * x[r, (2i + k) mod L]``.
    """
    cdef Py_ssize_t R = x.shape[0]
    cdef Py_ssize_t L = x.shape[1]
    cdef Py_ssize_t T = lo.shape[0]
    cdef Py_ssize_t half = L // 2
    cdef Py_ssize_t r, i, k, p
    cdef double sa, sd, v
    a_out = np.empty((R, half), dtype=np.float64)
    d_out = np.empty((R, half), dtype=np.float64)
    cdef double[:, ::1] A = a_out
    cdef double[:, ::1] D = d_out
    with nogil:
        for r in range(R):
            for i in range(half):
                sa = 0.0
                sd = 0.0
                for k in range(T):
                    p = (2 * i + k) % L
                    v = x[r, p]
                    sa = sa + lo[k] * v
                    sd = sd + hi[k] * v
                A[r, i] = sa
                D[r, i] = sd
    return a_out, d_out


def idwt_step(const double[:, ::1] approx, const double[:, ::1] detail,
              const double[::1] lo, const double[::1] hi):
    """Inverse of ``dwt_step`` (adjoint of the orthonormal analysis level)."""
    cdef Py_ssize_t R = approx.shape[0]
    cdef Py_ssize_t half = approx.shape[1]
    cdef Py_ssize_t L = 2 * half
    cdef Py_ssize_t T = lo.shape[0]
    cdef Py_ssize_t r, i, k, p
    out = np.zeros((R, L), dtype=np.float64)
    cdef double[:, ::1] X = out
    with nogil:
        for r in range(R):
            for i in range(half):
                for k in range(T):
                    p = (2 * i + k) % L
                    X[r, p] += lo[k] * approx[r, i] + hi[k] * detail[r, i]
    return out
