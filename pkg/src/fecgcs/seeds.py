"""Seed derivation for reproducible sweeps.

``derive_seed(master, a, b, ...)`` folds each integer into a SplitMix64
state::

    s = splitmix64(master)
    for v in path: s = splitmix64(s ^ (v mod 2**64))

so a grid point's seed depends only on its own coordinates.
"""
U64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    s = splitmix64(int(master) & U64)
    for v in path:
        s = splitmix64(s ^ (int(v) & U64))
    return s
