"""Compare the compiled and NumPy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20]

Each kernel is timed on a problem of the size met in the pipeline (one
512-sample window, 15 windows per channel, h = 32). Outputs of the two
backends are also compared.
"""
import argparse
import timeit

import numpy as np

from fecgcs import kernels
from fecgcs.sensing import generate_matrix
from fecgcs.wavelet import D4_HIGHPASS, D4_LOWPASS


def cases(rng):
    phi = generate_matrix(256, 512, 12, seed=0)
    idx = phi.columns
    X = rng.standard_normal((512, 15))
    Z = rng.standard_normal((256, 15))
    P = rng.standard_normal((512, 256))
    starts = np.arange(0, 512, 32, dtype=np.int64)
    rows = rng.standard_normal((256, 512))
    a, d = rows[:, :256].copy(), rows[:, 256:].copy()
    return {
        "scatter_rows": lambda k: k.scatter_rows(idx, X, 256),
        "gather_rows": lambda k: k.gather_rows(idx, Z),
        "block_gram": lambda k: k.block_gram(idx, P, starts, 32),
        "dwt_step": lambda k: k.dwt_step(rows, D4_LOWPASS, D4_HIGHPASS),
        "idwt_step": lambda k: k.idwt_step(a, d, D4_LOWPASS, D4_HIGHPASS),
    }


def _parts(out):
    return out if isinstance(out, tuple) else (out,)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"{'kernel':<14}" + "".join(f"{n + ' (ms)':>16}" for n in names)
          + (f"{'speedup':>10}{'max |diff|':>14}" if len(names) == 2 else ""))
    for kname, fn in cases(np.random.default_rng(0)).items():
        times, outs = [], []
        for n in names:
            impl = backends[n]
            outs.append(fn(impl))
            best = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
            times.append(best * 1e3)
        line = f"{kname:<14}" + "".join(f"{t:>16.3f}" for t in times)
        if len(names) == 2:
            diff = max(float(np.abs(u - v).max()) for u, v in zip(_parts(outs[0]), _parts(outs[1])))
            py, cy = times[names.index("python")], times[names.index("cython")]
            line += f"{py / cy:>10.1f}{diff:>14.1e}"
        print(line)
    if len(names) == 1:
        print("compiled backend not built; only the NumPy path was timed")


if __name__ == "__main__":
    main()
