import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fecgcs import metrics

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestMse:
    def test_known(self):
        assert metrics.mse([1, 2, 3], [1, 2, 5]) == pytest.approx(4 / 3)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics.mse(np.zeros(3), np.zeros(4))

    @given(arrays(np.float64, 16, elements=finite), arrays(np.float64, 16, elements=finite))
    def test_symmetric_nonnegative(self, a, b):
        assert metrics.mse(a, b) == metrics.mse(b, a) >= 0


class TestPearson:
    def test_affine_invariance(self, rng):
        a = rng.standard_normal(100)
        assert metrics.pearson(a, 3 * a + 7) == pytest.approx(1.0)
        assert metrics.pearson(a, -2 * a) == pytest.approx(-1.0)

    def test_matches_numpy(self, rng):
        a, b = rng.standard_normal((2, 200))
        assert metrics.pearson(a, b) == pytest.approx(np.corrcoef(a, b)[0, 1], abs=1e-14)

    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            metrics.pearson(np.ones(5), np.arange(5))

    @settings(max_examples=50)
    @given(arrays(np.float64, 12, elements=finite), arrays(np.float64, 12, elements=finite))
    def test_bounded(self, a, b):
        try:
            r = metrics.pearson(a, b)
        except ValueError:
            return
        assert -1.0 <= r <= 1.0


class TestPeaks:
    def spikes(self, positions, n=1000):
        x = np.zeros(n)
        x[positions] = 1.0
        return x

    def test_finds_isolated_spikes(self):
        pos = [100, 300, 520, 800]
        p = metrics.detect_peaks(self.spikes(pos), 250.0)
        assert list(p.indices) == pos
        assert p.min_distance == 62

    def test_refractory_keeps_larger(self):
        x = self.spikes([100, 130])
        x[130] = 0.8
        assert list(metrics.detect_peaks(x, 250.0).indices) == [100]

    def test_sign_agnostic(self):
        x = -self.spikes([200, 600])
        assert list(metrics.detect_peaks(x, 250.0).indices) == [200, 600]

    def test_agreement_tolerance(self):
        p = metrics.PeakList(np.array([100, 300, 500]), 62)
        q = metrics.PeakList(np.array([102, 304, 500]), 62)
        assert metrics.peak_agreement(p, q) == pytest.approx(2 * 2 / 6)
        assert metrics.peak_agreement(p, q, tolerance=4) == 1.0

    def test_agreement_empty(self):
        e = metrics.PeakList(np.array([], dtype=np.int64), 1)
        assert metrics.peak_agreement(e, e) == 1.0


class TestSinr:
    def test_powers(self):
        f = np.full(10, 1.0)
        m = np.full(10, 10.0)
        n = np.full(10, np.sqrt(10.0))
        sir, snr, sinr = metrics.measure_sinr(f, m, n)
        assert sir == pytest.approx(-20.0)
        assert snr == pytest.approx(-10.0)
        assert sinr == pytest.approx(-10 * np.log10(110))

    def test_no_maternal(self):
        sir, snr, sinr = metrics.measure_sinr(np.ones(4), np.zeros(4), np.ones(4))
        assert sir == float("inf")
        assert snr == sinr == pytest.approx(0.0)

    def test_zero_interference_rejected(self):
        with pytest.raises(ValueError):
            metrics.measure_sinr(np.ones(4), np.zeros(4), np.zeros(4))
