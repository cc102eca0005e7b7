"""Experiment pipeline and parameter sweeps.

The pipeline compresses every channel window by window, reconstructs it with
BSBL-BO, band-passes both the original and the reconstruction, runs
deflation FastICA on each and compares the fetal components.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import bsbl, ica, metrics, sensing, synth
from .seeds import derive_seed
from .signal_io import CompressedPayload, MultichannelRecording, segment_channel

# tags separating independent random streams under one master seed
DATA_STREAM = 0
MATRIX_STREAM = 1
ICA_STREAM = 2

SWEEP_KINDS = ("cr", "density", "blocksize", "sinr")


@dataclass(frozen=True)
class PipelineConfig:
    cr: float = 50.0
    d: int = 12
    block_size: int = 32
    window_length: int = 512
    domain: str = "time"
    bsbl: bsbl.BsblConfig = field(default_factory=bsbl.BsblConfig)
    band: tuple = ica.DEFAULT_BAND
    k: int | None = None
    matrix_seed: int = 0
    ica_seed: int = 0

    @property
    def M(self) -> int:
        return sensing.rows_for_cr(self.window_length, self.cr)


@dataclass
class PipelineResult:
    original: MultichannelRecording
    reconstructed: MultichannelRecording
    payloads: list
    phi: sensing.SparseBinaryMatrix
    ica_original: ica.IcaResult
    ica_reconstructed: ica.IcaResult
    match: ica.MatchReport
    fetal_index: int
    fetal_match_index: int
    fetal_correlation: float
    channel_mse: list
    peak_agreement: float
    runtime_s: dict

    def summary(self) -> dict:
        return {
            "M": self.phi.M, "N": self.phi.N, "d": self.phi.d,
            "matrix_seed": int(self.phi.seed),
            "fetal_component": self.fetal_index,
            "fetal_match": self.fetal_match_index,
            "fetal_correlation": self.fetal_correlation,
            "peak_agreement": self.peak_agreement,
            "channel_mse": self.channel_mse,
            "mean_mse": float(np.mean(self.channel_mse)),
            "matching": self.match.to_dict(),
            "converged_original": [bool(v) for v in self.ica_original.converged],
            "converged_reconstructed": [bool(v) for v in self.ica_reconstructed.converged],
        }


def compress_recording(rec: MultichannelRecording, phi: sensing.SparseBinaryMatrix) -> list:
    """One payload per channel, each window compressed by ``phi``."""
    payloads = []
    for c in range(rec.channels):
        seg = segment_channel(rec.data[c], phi.N)
        y = sensing.compress(phi, seg.windows)
        payloads.append(CompressedPayload(y, phi.seed, phi.M, phi.N, phi.d, c, seg.pad_tail))
    return payloads


def _excess_kurtosis(x):
    x = x - x.mean()
    v = np.mean(x ** 2)
    return float(np.mean(x ** 4) / v ** 2 - 3.0) if v > 0 else 0.0


def identify_fetal(components: np.ndarray, fs: float, reference=None) -> int:
    """Index of the fetal component.

    With a reference source (synthetic data) this is the component with the
    largest |Pearson| against it. Otherwise: among super-Gaussian components
    (excess kurtosis > 1) the one with the highest detected beat rate, or the
    most super-Gaussian component if none qualifies.
    """
    if reference is not None:
        return int(np.argmax(ica.abs_correlation_matrix(components, reference)[:, 0]))
    kurt = np.array([_excess_kurtosis(c) for c in components])
    spiky = np.flatnonzero(kurt > 1.0)
    if spiky.size == 0:
        return int(np.argmax(kurt))
    rates = [len(metrics.detect_peaks(components[i], fs)) for i in spiky]
    return int(spiky[int(np.argmax(rates))])


def run_pipeline(rec: MultichannelRecording, config: PipelineConfig = PipelineConfig(),
                 reference=None) -> PipelineResult:
    """Compress, reconstruct and compare ICA extractions of ``rec``."""
    times = {}
    t0 = time.perf_counter()
    phi = sensing.generate_matrix(config.M, config.window_length, config.d, config.matrix_seed)
    payloads = compress_recording(rec, phi)
    times["compress"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    recon = bsbl.reconstruct_recording(payloads, config.block_size, config.bsbl,
                                       rec.sampling_rate_hz, config.domain)
    times["reconstruct"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ica_o = ica.extract(rec, k=config.k, seed=config.ica_seed, band=config.band)
    ica_r = ica.extract(recon, k=config.k, seed=config.ica_seed, band=config.band)
    match = ica.match_components(ica_o, ica_r)
    fs = rec.sampling_rate_hz
    ref = None if reference is None else np.atleast_2d(reference)
    fi = identify_fetal(ica_o.components, fs, ref)
    row = ica.abs_correlation_matrix(ica_o.components[fi:fi + 1], ica_r.components)[0]
    fj = int(np.argmax(row))
    agreement = metrics.peak_agreement(metrics.detect_peaks(ica_o.components[fi], fs),
                                       metrics.detect_peaks(ica_r.components[fj], fs))
    times["ica"] = time.perf_counter() - t0
    channel_mse = [metrics.mse(a, b) for a, b in zip(rec.data, recon.data)]
    return PipelineResult(rec, recon, payloads, phi, ica_o, ica_r, match, fi, fj,
                          float(row[fj]), channel_mse, agreement, times)


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRow:
    value: float
    mean_correlation: float
    std_correlation: float
    mean_mse: float
    mean_runtime_s: float
    trials: int


@dataclass
class SweepReport:
    variable_name: str
    rows: list

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.value)
        for r in self.rows:
            if r.trials < 1 or r.std_correlation < 0:
                raise ValueError(f"invalid sweep row {r}")

    def values(self) -> list:
        return [r.value for r in self.rows]

    def correlations(self) -> list:
        return [r.mean_correlation for r in self.rows]

    def to_csv(self) -> str:
        """Deterministic CSV of record; runtimes are kept out (see ``timing_csv``)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.variable_name, "mean_correlation", "std_correlation", "mean_mse", "trials"])
        for r in self.rows:
            w.writerow([_fmt(r.value), repr(r.mean_correlation), repr(r.std_correlation),
                        repr(r.mean_mse), r.trials])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.variable_name, "mean_runtime_s"])
        for r in self.rows:
            w.writerow([_fmt(r.value), f"{r.mean_runtime_s:.6f}"])
        return buf.getvalue()


def _fmt(v) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class TrialResult:
    value: float
    trial: int
    correlation: float
    mse: float
    runtime_s: float


def grid_values(kind: str, lo=None, hi=None, step=None) -> list:
    """Grid for a sweep kind; defaults are the standard sweep ranges."""
    defaults = {"cr": (20, 65, 5), "density": (2, 14, 1),
                "blocksize": (4, 90, 2), "sinr": (-35, -15, 5)}
    if kind not in defaults:
        raise ValueError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    dlo, dhi, dstep = defaults[kind]
    lo = dlo if lo is None else lo
    hi = dhi if hi is None else hi
    step = dstep if step is None else step
    if step <= 0 or lo > hi:
        raise ValueError(f"invalid grid bounds lo={lo}, hi={hi}, step={step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    vals = [lo + i * step for i in range(n)]
    if kind in ("density", "blocksize"):
        if any(not float(v).is_integer() or v < 1 for v in vals):
            raise ValueError(f"{kind} grid must hold positive integers")
        vals = [int(v) for v in vals]
    return vals


def trial_setup(kind: str, value, index: int, trial: int, master_seed: int,
                base_spec: synth.SynthSpec, base: PipelineConfig):
    """Synth spec and pipeline config for one (grid point, trial).

    Data and ICA seeds depend on the trial only, so every grid point of a
    sweep sees the same recordings. Matrix seeds depend on (grid point,
    trial). For the SINR sweep the data seeds come from ``sinr_sweep_spec``
    and differ per grid point.
    """
    spec = replace(base_spec, seed=derive_seed(master_seed, DATA_STREAM, trial))
    cfg = replace(base, matrix_seed=derive_seed(master_seed, MATRIX_STREAM, index, trial),
                  ica_seed=derive_seed(master_seed, ICA_STREAM, trial))
    if kind == "cr":
        cfg = replace(cfg, cr=float(value))
    elif kind == "density":
        cfg = replace(cfg, d=int(value))
    elif kind == "blocksize":
        cfg = replace(cfg, block_size=int(value))
    elif kind == "sinr":
        # same seed as entry (index, trial) of sinr_sweep_spec(..., seed=derive_seed(master, DATA_STREAM))
        spec = replace(base_spec, sinr_db=float(value),
                       seed=derive_seed(derive_seed(master_seed, DATA_STREAM), index, trial))
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")
    return spec, cfg


def run_trial(kind, value, index, trial, master_seed, base_spec, base) -> TrialResult:
    spec, cfg = trial_setup(kind, value, index, trial, master_seed, base_spec, base)
    t0 = time.perf_counter()
    data = synth.generate(spec)
    res = run_pipeline(data.recording, cfg, reference=data.fetal_source)
    return TrialResult(float(value), trial, res.fetal_correlation,
                       float(np.mean(res.channel_mse)), time.perf_counter() - t0)


def _run_trial_args(args):
    return run_trial(*args)


def aggregate(kind: str, results) -> SweepReport:
    """Mean and population std per grid value; input order is irrelevant."""
    by_value = {}
    for r in results:
        by_value.setdefault(r.value, []).append(r)
    rows = []
    for v, rs in by_value.items():
        rs = sorted(rs, key=lambda r: r.trial)
        c = np.array([r.correlation for r in rs])
        rows.append(SweepRow(v, float(c.mean()), float(c.std()),
                             float(np.mean([r.mse for r in rs])),
                             float(np.mean([r.runtime_s for r in rs])), len(rs)))
    return SweepReport(kind, rows)


def run_sweep(kind: str, values, trials: int, master_seed: int = 0,
              base_spec: synth.SynthSpec = synth.SynthSpec(),
              base: PipelineConfig = PipelineConfig(), jobs: int = 1,
              runner=None) -> SweepReport:
    """Run every (grid value, trial) pair and aggregate.

    ``runner`` replaces :func:`run_trial` (same signature), which lets
    callers memoise trials shared between sweeps.
    """
    values = list(values)
    if not values:
        raise ValueError("empty sweep grid")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tasks = [(kind, v, i, t, master_seed, base_spec, base)
             for i, v in enumerate(values) for t in range(trials)]
    if runner is not None:
        results = [runner(*a) for a in tasks]
    elif jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial_args, tasks))
    else:
        results = [run_trial(*a) for a in tasks]
    return aggregate(kind, results)
