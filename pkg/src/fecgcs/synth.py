"""Synthetic multichannel fetal/maternal ECG mixtures with a set SINR.

A deliberately simple stand-in for a cardiac dipole simulator:

* each heart is a quasi-periodic train of Gaussian-windowed biphasic spikes
  (R lobe plus a smaller, wider, delayed S lobe), beat-to-beat period jitter
  of +-3%;
* each train is projected to the channels by a random unit mixing vector;
* noise per channel is pink (1/f) noise plus a random-walk baseline wander,
  equal power each;
* the three parts are scaled so that SNR = SIR + 10 dB and the requested
  SINR holds exactly in mean-square power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .metrics import measure_sinr
from .signal_io import MultichannelRecording

SNR_MINUS_SIR_DB = 10.0
PERIOD_JITTER = 0.03
FETAL_WIDTH_S = 0.008
MATERNAL_WIDTH_S = 0.016


@dataclass(frozen=True)
class SynthSpec:
    sinr_db: float = -15.0
    channels: int = 8
    samples: int = 7680
    sampling_rate_hz: float = 250.0
    fetal_rate_hz: float = 2.2
    maternal_rate_hz: float = 1.1
    seed: int = 0
    include_maternal: bool = True

    def __post_init__(self):
        if self.channels < 1 or self.samples < 1:
            raise ValueError("channels and samples must be >= 1")
        nyq = self.sampling_rate_hz / 2
        if not (0 < self.fetal_rate_hz < nyq and 0 < self.maternal_rate_hz < nyq):
            raise ValueError("heart rates must lie in (0, fs/2)")


@dataclass
class SynthResult:
    recording: MultichannelRecording
    fecg: np.ndarray
    mecg: np.ndarray
    noise: np.ndarray
    fetal_source: np.ndarray
    maternal_source: np.ndarray
    fetal_beats: np.ndarray
    maternal_beats: np.ndarray


def spike(t, width):
    """Biphasic spike: unit R lobe at 0 and a -0.4 S lobe 1.8 widths later."""
    u = t / width
    return np.exp(-0.5 * u ** 2) - 0.4 * np.exp(-0.5 * ((u - 1.8) / 1.2) ** 2)


def pulse_train(rng, samples, fs, rate_hz, width_s):
    """Quasi-periodic spike train; returns (signal, beat sample indices)."""
    period = 1.0 / rate_hz
    t = rng.uniform(0, period)
    beats = []
    while t < samples / fs:
        beats.append(t)
        t += period * (1.0 + rng.uniform(-PERIOD_JITTER, PERIOD_JITTER))
    times = np.arange(samples) / fs
    sig = np.zeros(samples)
    half = int(math.ceil(8 * width_s * fs))
    for tb in beats:
        c = int(round(tb * fs))
        lo, hi = max(c - half, 0), min(c + half + 1, samples)
        sig[lo:hi] += spike(times[lo:hi] - tb, width_s)
    return sig, np.round(np.array(beats) * fs).astype(np.int64)


def pink_noise(rng, channels, samples):
    """Unit mean-square 1/f noise, one row per channel."""
    white = rng.standard_normal((channels, samples))
    spec = np.fft.rfft(white, axis=1)
    f = np.fft.rfftfreq(samples)
    shape = np.zeros_like(f)
    shape[1:] = 1.0 / np.sqrt(f[1:])
    x = np.fft.irfft(spec * shape, n=samples, axis=1)
    return _unit_power(x)


def random_walk(rng, channels, samples):
    """Unit mean-square zero-mean random walk, one row per channel."""
    x = np.cumsum(rng.standard_normal((channels, samples)), axis=1)
    return _unit_power(x)


def _unit_power(x):
    x = x - x.mean(axis=1, keepdims=True)
    p = np.sqrt(np.mean(x ** 2, axis=1, keepdims=True))
    return np.divide(x, p, out=np.zeros_like(x), where=p > 0)


def _unit_vector(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _scaled(x, target_power):
    p = np.mean(x ** 2)
    if p == 0:
        raise ValueError("cannot scale a zero-power component")
    return x * math.sqrt(target_power / p)


def generate(spec: SynthSpec) -> SynthResult:
    """Draw one mixture; deterministic given ``spec.seed``.

    The maternal part has unit mean-square power. With the maternal part
    switched off the noise takes its place and SNR equals the SINR target.
    """
    rng = np.random.default_rng(spec.seed)
    C, T, fs = spec.channels, spec.samples, spec.sampling_rate_hz
    s_f, beats_f = pulse_train(rng, T, fs, spec.fetal_rate_hz, FETAL_WIDTH_S)
    s_m, beats_m = pulse_train(rng, T, fs, spec.maternal_rate_hz, MATERNAL_WIDTH_S)
    a_f = _unit_vector(rng, C)
    a_m = _unit_vector(rng, C)
    noise = math.sqrt(0.5) * pink_noise(rng, C, T) + math.sqrt(0.5) * random_walk(rng, C, T)

    if spec.include_maternal:
        sir = spec.sinr_db + 10 * math.log10(1 + 10 ** (-SNR_MINUS_SIR_DB / 10))
        snr = sir + SNR_MINUS_SIR_DB
        mecg = _scaled(np.outer(a_m, s_m), 1.0)
        p_f = 10 ** (sir / 10)
        fecg = _scaled(np.outer(a_f, s_f), p_f)
        noise = _scaled(noise, p_f / 10 ** (snr / 10))
    else:
        mecg = np.zeros((C, T))
        fecg = _scaled(np.outer(a_f, s_f), 1.0)
        noise = _scaled(noise, 10 ** (-spec.sinr_db / 10))
    data = fecg + mecg + noise
    return SynthResult(MultichannelRecording(data, fs), fecg, mecg, noise,
                       s_f, s_m, beats_f, beats_m)


def sinr_sweep_spec(lo_db: float, hi_db: float, step: float, trials: int,
                    seed: int = 0, base: SynthSpec = SynthSpec()) -> list[SynthSpec]:
    """Grid of specs over SINR levels, ``trials`` distinct seeds per level."""
    from .seeds import derive_seed

    if lo_db > hi_db or step <= 0 or trials < 1:
        raise ValueError("need lo <= hi, step > 0 and trials >= 1")
    n_levels = int(math.floor((hi_db - lo_db) / step + 1e-9)) + 1
    levels = [lo_db + i * step for i in range(n_levels)]
    if not levels:
        raise ValueError("empty SINR grid")
    return [replace(base, sinr_db=float(v), seed=derive_seed(seed, i, t))
            for i, v in enumerate(levels) for t in range(trials)]


def check_targets(result: SynthResult) -> tuple[float, float, float]:
    """Measured (SIR, SNR, SINR) of a generated mixture."""
    return measure_sinr(result.fecg, result.mecg, result.noise)
