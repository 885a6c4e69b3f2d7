"""Counter-based SplitMix64 streams with Box-Muller normals.

Value ``i`` of a stream with key ``k`` is ``mix(k + (i + 1) * GAMMA)``,
which equals the (i+1)-th output of a SplitMix64 generator seeded with
``k``.  Being counter-based, a stream can be generated in one vectorised
call, and independent streams are keyed by ``derive_key(seed, *labels)``.

Uniforms are ``(x >> 11) * 2**-53``.  Normals pair consecutive uniforms
``(u1, u2)`` as ``sqrt(-2 ln(1 - u1)) * (cos 2 pi u2, sin 2 pi u2)``.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * MUL1) & MASK
    z = ((z ^ (z >> 27)) * MUL2) & MASK
    return z ^ (z >> 31)


def _label_value(label) -> int:
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    return int(label) & MASK


def derive_key(seed: int, *labels) -> int:
    key = mix64(int(seed) & MASK)
    for label in labels:
        key = mix64(key ^ mix64((_label_value(label) + 1) * GAMMA))
    return key


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MUL2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, key: int):
        self.key = int(key) & MASK
        self.position = 0

    def uint64(self, n: int) -> np.ndarray:
        counters = np.arange(self.position + 1, self.position + n + 1, dtype=np.uint64)
        self.position += n
        with np.errstate(over="ignore"):
            states = counters * np.uint64(GAMMA) + np.uint64(self.key)
            return _mix64_array(states)

    def uniform(self, n: int) -> np.ndarray:
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n]


def stream(seed: int, *labels) -> SplitMix64:
    return SplitMix64(derive_key(seed, *labels))
