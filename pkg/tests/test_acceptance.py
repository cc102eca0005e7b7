"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line, also collected in
the terminal summary. Pipeline trials shared between criteria are computed
once: data, ICA and matrix seeds depend on the trial index only, so every
grid point of criteria 4-6 and 8 sees the same recordings.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fecgcs import bsbl, experiments, sensing, synth
from fecgcs.wavelet import WaveletBasis, dwt, effective_sensing, idwt
from helpers import block_sparse_instance, oracle_least_squares, rel_error

pytestmark = pytest.mark.acceptance

MASTER_SEED = 0
SEEDS = 5
SMALL_INSTANCES = 50
BASE_SPEC = synth.SynthSpec()
BASE_CFG = experiments.PipelineConfig(cr=50.0, d=12, block_size=32, window_length=512)

_trials = {}


def report(n, ok, detail):
    line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def shared_runner(kind, value, index, trial, master, spec, base):
    """``run_trial`` memoised on the resolved (spec, config) pair.

    Outside the SINR sweep the grid index is pinned to 0, so matrix seeds
    are common random numbers across grid points as well.
    """
    if kind != "sinr":
        index = 0
    s, c = experiments.trial_setup(kind, value, index, trial, master, spec, base)
    key = (s, c)
    if key not in _trials:
        _trials[key] = experiments.run_trial(kind, value, index, trial, master, spec, base)
    r = _trials[key]
    return experiments.TrialResult(float(value), trial, r.correlation, r.mse, r.runtime_s)


def sweep(kind, values):
    return experiments.run_sweep(kind, values, SEEDS, MASTER_SEED, BASE_SPEC, BASE_CFG,
                                 runner=shared_runner)


def monotone_up_to_one_inversion(values, increasing, limit):
    """At most one adjacent pair breaks the order, by no more than ``limit``."""
    steps = np.diff(values) if increasing else -np.diff(values)
    bad = steps[steps < 0]
    return len(bad) <= 1 and (len(bad) == 0 or -bad[0] <= limit), bad


@pytest.fixture(scope="module")
def small_runs():
    t0 = time.perf_counter()
    learned, identity, oracle = [], [], []
    part = bsbl.uniform_partition(64, 4)
    for seed in range(SMALL_INSTANCES):
        phi, x, y, support = block_sparse_instance(seed)
        learned.append(rel_error(bsbl.reconstruct(y, phi, part).x_hat, x))
        identity.append(rel_error(bsbl.reconstruct(
            y, phi, part, bsbl.BsblConfig(learn_correlation=False)).x_hat, x))
        oracle.append(rel_error(oracle_least_squares(phi, y, support), x))
    return np.array(learned), np.array(identity), np.array(oracle), time.perf_counter() - t0


class TestAcceptance:
    def test_01_ops_count(self):
        t0 = time.perf_counter()
        counts = [sensing.compression_ops(sensing.generate_matrix(256, 512, d, seed=1)).additions
                  for d in (2, 12)]
        dt = time.perf_counter() - t0
        ok = report(1, counts == [768, 5888] and dt < 1.0,
                    f"additions d=2 -> {counts[0]}, d=12 -> {counts[1]} in {dt:.3f} s")
        assert ok

    def test_02_small_instances_vs_oracle(self, small_runs):
        learned, _, oracle, dt = small_runs
        frac = float(np.mean(learned < 1e-2))
        ok = report(2, frac >= 0.9 and np.all(oracle < 1e-8) and dt < 60,
                    f"BSBL < 1e-2 on {frac:.0%} of {SMALL_INSTANCES}, oracle max "
                    f"{oracle.max():.1e}, {dt:.1f} s")
        assert ok

    def test_03_correlation_learning_benefit(self, small_runs):
        learned, identity, _, _ = small_runs
        miss = float(np.mean(identity > 0.1))
        ok = report(3, learned.mean() < identity.mean() and miss >= 0.2,
                    f"mean error learned {learned.mean():.2e} vs identity {identity.mean():.2e}, "
                    f"identity misses {miss:.0%}")
        assert ok

    def test_04_end_to_end_fidelity(self):
        t0 = time.perf_counter()
        corr = [shared_runner("cr", 50.0, 0, t, MASTER_SEED, BASE_SPEC, BASE_CFG).correlation
                for t in range(SEEDS)]
        dt = time.perf_counter() - t0
        mean = float(np.mean(corr))
        ok = report(4, mean >= 0.9 and dt < 300,
                    f"mean |r| {mean:.4f} over {SEEDS} seeds "
                    f"({', '.join(f'{c:.3f}' for c in corr)}), {dt:.0f} s")
        assert ok

    def test_05_density_robustness(self):
        rep = sweep("density", [2, 12])
        a, b = rep.correlations()
        ok = report(5, abs(a - b) < 0.05, f"d=2 {a:.4f}, d=12 {b:.4f}, |diff| {abs(a - b):.4f}")
        assert ok

    def test_06_block_size_robustness(self):
        rep = sweep("blocksize", [8, 16, 32, 64])
        c = rep.correlations()
        spread = max(c) - min(c)
        ok = report(6, spread < 0.05,
                    "h=8,16,32,64 -> " + ", ".join(f"{v:.4f}" for v in c) + f", spread {spread:.4f}")
        assert ok

    def test_07_sinr_curve(self):
        rep = sweep("sinr", [-35, -30, -25, -20, -15])
        c = rep.correlations()
        mono, bad = monotone_up_to_one_inversion(c, True, 0.03)
        ok = report(7, mono and c[-1] >= 0.85,
                    "SINR -35..-15 -> " + ", ".join(f"{v:.4f}" for v in c)
                    + f", inversions {np.round(-bad, 4).tolist()}")
        assert ok

    def test_08_cr_threshold(self):
        values = [20, 30, 40, 50, 60, 65]
        rep = sweep("cr", values)
        c = rep.correlations()
        mono, bad = monotone_up_to_one_inversion(c, False, 0.03)
        at50 = c[values.index(50)]
        ok = report(8, mono and at50 >= 0.9,
                    "CR 20..65 -> " + ", ".join(f"{v:.4f}" for v in c)
                    + f", inversions {np.round(-bad, 4).tolist()}")
        assert ok

    def test_09_wavelet_suite(self):
        worst_rt = worst_parseval = worst_omega = 0.0
        rng = np.random.default_rng(9)
        for N in (64, 256):
            basis = WaveletBasis(N)
            x = rng.standard_normal((5, N))
            theta = dwt(x, basis)
            worst_rt = max(worst_rt, np.abs(idwt(theta, basis) - x).max())
            worst_parseval = max(worst_parseval, np.abs(
                np.sum(theta ** 2, axis=1) - np.sum(x ** 2, axis=1)).max())
            phi = sensing.generate_matrix(N // 2, N, 4, seed=N)
            omega = phi.to_dense() @ basis.matrix()
            worst_omega = max(worst_omega, np.abs(effective_sensing(phi, basis) - omega).max())
        ok = report(9, max(worst_rt, worst_parseval, worst_omega) < 1e-10,
                    f"round-trip {worst_rt:.1e}, Parseval {worst_parseval:.1e}, Omega {worst_omega:.1e}")
        assert ok

    def test_10_pipeline_reproducible(self, tmp_path):
        argv = [sys.executable, "-m", "fecgcs", "--seed", "11", "pipeline",
                "--channels", "4", "--samples", "2048", "--N", "256", "--block-size", "32"]
        for name in ("a", "b"):
            subprocess.run(argv + ["--out", str(tmp_path / name)], check=True, capture_output=True)
        names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
                   for n in names)
        ok = report(10, len(names) == 4 and same, f"{len(names)} CSV files byte-identical: {same}")
        assert ok
