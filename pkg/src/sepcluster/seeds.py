"""Child-seed derivation for reproducible parallel trials.

A child seed is a pure function of the master seed and a tuple of indices
(axis positions, trial number), so trials can run in any order or process:

    s = splitmix64(master)
    for i in indices:
        s = splitmix64(s ^ splitmix64(i + 1))

The +1 keeps index 0 from being a fixed point of the XOR.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, *indices: int) -> int:
    s = splitmix64(int(master) & MASK64)
    for i in indices:
        s = splitmix64(s ^ splitmix64((int(i) + 1) & MASK64))
    return s
