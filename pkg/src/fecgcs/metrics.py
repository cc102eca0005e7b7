"""Evaluation metrics: MSE, Pearson correlation, R-peak detection, SINR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def mse(a, b) -> float:
    """Mean of squared elementwise differences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def pearson(a, b) -> float:
    """Sample Pearson correlation of two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least two samples")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(da @ da)
    nb = np.sqrt(db @ db)
    if na == 0 or nb == 0:
        raise ValueError("zero-variance input")
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class PeakList:
    indices: np.ndarray
    min_distance: int

    def __len__(self):
        return len(self.indices)


def detect_peaks(x, sampling_rate_hz: float, min_rate_hz: float = 4.0) -> PeakList:
    """R-peak style detection on ``|x|``.

    Candidates are local maxima of ``|x|`` above half the 99th percentile of
    ``|x|``. They are accepted in order of decreasing amplitude, skipping any
    candidate closer than ``min_distance = round(fs / min_rate_hz)`` samples
    to an already accepted peak. The fastest allowed beat rate is
    ``min_rate_hz`` (the refractory gap is one period at that rate).
    """
    a = np.abs(np.asarray(x, dtype=np.float64).ravel())
    if a.size < 2:
        raise ValueError("need at least two samples")
    min_distance = max(int(round(sampling_rate_hz / min_rate_hz)), 1)
    threshold = 0.5 * np.percentile(a, 99)
    left = np.concatenate([[-np.inf], a[:-1]])
    right = np.concatenate([a[1:], [-np.inf]])
    cand = np.flatnonzero((a > left) & (a >= right) & (a > threshold))
    order = cand[np.argsort(-a[cand], kind="stable")]
    taken = np.zeros(a.size, dtype=bool)
    accepted = []
    for i in order:
        lo = max(i - min_distance + 1, 0)
        if not taken[lo:i + min_distance].any():
            accepted.append(i)
            taken[i] = True
    return PeakList(np.array(sorted(accepted), dtype=np.int64), min_distance)


def peak_agreement(p: PeakList, q: PeakList, tolerance: int = 2) -> float:
    """Fraction of peaks matched one-to-one within ``tolerance`` samples.

    Returns ``2 * matches / (len(p) + len(q))``; 1.0 when both are empty.
    """
    if len(p) == 0 and len(q) == 0:
        return 1.0
    qi = list(q.indices)
    used = set()
    matches = 0
    for i in p.indices:
        best = None
        for j, v in enumerate(qi):
            if j not in used and abs(int(v) - int(i)) <= tolerance:
                if best is None or abs(v - i) < abs(qi[best] - i):
                    best = j
        if best is not None:
            used.add(best)
            matches += 1
    return 2.0 * matches / (len(p) + len(q))


def _power(x) -> float:
    return float(np.mean(np.square(np.asarray(x, dtype=np.float64))))


def measure_sinr(fecg, mecg, noise) -> tuple[float, float, float]:
    """Return (SIR, SNR, SINR) in dB from mean-square powers.

    SIR is fetal over maternal power, SNR fetal over noise power, SINR fetal
    over the sum of both. A ratio whose denominator is zero is infinite.
    """
    shapes = {np.shape(fecg), np.shape(mecg), np.shape(noise)}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch: {shapes}")
    pf, pm, pn = _power(fecg), _power(mecg), _power(noise)
    if pm + pn == 0:
        raise ValueError("maternal and noise power are both zero")

    def db(num, den):
        return float("inf") if den == 0 else 10.0 * np.log10(num / den)

    return db(pf, pm), db(pf, pn), db(pf, pm + pn)
