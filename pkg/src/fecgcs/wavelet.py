"""Periodized Daubechies-4 (4-tap) orthonormal wavelet transform.

Coefficient layout for ``levels = J``::

    [approx_J | detail_J | detail_{J-1} | ... | detail_1]

coarsest first. ``levels = 0`` is the identity transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .sensing import OpsCount, SparseBinaryMatrix

_SQRT3 = math.sqrt(3.0)
D4_LOWPASS = np.array([1 + _SQRT3, 3 + _SQRT3, 3 - _SQRT3, 1 - _SQRT3]) / (4 * math.sqrt(2.0))
D4_HIGHPASS = np.array([(-1) ** k * D4_LOWPASS[3 - k] for k in range(4)])


def max_levels(N: int) -> int:
    """Largest depth such that ``N`` is divisible by ``2**levels``."""
    if N < 1:
        raise ValueError("N must be positive")
    levels = 0
    while N % 2 == 0:
        N //= 2
        levels += 1
    return levels


@dataclass(frozen=True)
class WaveletBasis:
    """Synthesis basis Psi of length ``N`` and depth ``levels``.

    ``levels=None`` selects full depth (log2 N for powers of two).
    """

    N: int
    levels: int | None = None
    filter: np.ndarray = field(default_factory=lambda: D4_LOWPASS.copy(), compare=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        levels = max_levels(self.N) if self.levels is None else int(self.levels)
        if levels < 0 or self.N % (2 ** levels):
            raise ValueError(f"N={self.N} is not divisible by 2**{levels}")
        object.__setattr__(self, "levels", levels)
        lo = np.ascontiguousarray(self.filter, dtype=np.float64)
        object.__setattr__(self, "filter", lo)
        object.__setattr__(self, "_hi", np.ascontiguousarray(
            [(-1) ** k * lo[len(lo) - 1 - k] for k in range(len(lo))], dtype=np.float64))

    @property
    def highpass(self) -> np.ndarray:
        return self._hi

    def matrix(self) -> np.ndarray:
        """Dense N x N synthesis matrix (columns are basis vectors)."""
        return idwt(np.eye(self.N), self).T


def _as_rows(x, N):
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != N or arr.ndim > 2:
        raise ValueError(f"expected trailing length {N}, got shape {arr.shape}")
    return np.ascontiguousarray(np.atleast_2d(arr)), arr.ndim == 1


def dwt(x, basis: WaveletBasis) -> np.ndarray:
    """Analysis ``theta = Psi.T @ x``; rows of a 2-D input are independent signals."""
    rows, flat = _as_rows(x, basis.N)
    out = rows.copy()
    length = basis.N
    for _ in range(basis.levels):
        approx, detail = kernels.dwt_step(np.ascontiguousarray(out[:, :length]), basis.filter, basis.highpass)
        half = length // 2
        out[:, :half] = approx
        out[:, half:length] = detail
        length = half
    return out[0] if flat else out


def idwt(theta, basis: WaveletBasis) -> np.ndarray:
    """Synthesis ``x = Psi @ theta``."""
    rows, flat = _as_rows(theta, basis.N)
    out = rows.copy()
    length = basis.N >> basis.levels
    for _ in range(basis.levels):
        approx = np.ascontiguousarray(out[:, :length])
        detail = np.ascontiguousarray(out[:, length:2 * length])
        out[:, :2 * length] = kernels.idwt_step(approx, detail, basis.filter, basis.highpass)
        length *= 2
    return out[0] if flat else out


def effective_sensing(phi: SparseBinaryMatrix, basis: WaveletBasis) -> np.ndarray:
    """Dense ``Omega = Phi @ Psi`` (M x N).

    Row m of Omega is ``Psi.T`` applied to row m of Phi, i.e. its wavelet
    analysis.
    """
    if phi.N != basis.N:
        raise ValueError(f"matrix has N={phi.N}, basis has N={basis.N}")
    return dwt(phi.to_dense(), basis)


def wavelet_compression_ops(N: int, levels: int | None = None) -> OpsCount:
    """Arithmetic of the periodized 4-tap filter bank.

    A level over L inputs produces L/2 approximation and L/2 detail outputs,
    each costing 4 multiplications and 3 additions. Selection of large
    coefficients is not counted.
    """
    basis = WaveletBasis(N, levels)
    mults = adds = 0
    length = N
    taps = len(basis.filter)
    for _ in range(basis.levels):
        outputs = 2 * (length // 2)
        mults += outputs * taps
        adds += outputs * (taps - 1)
        length //= 2
    return OpsCount(adds, mults)
