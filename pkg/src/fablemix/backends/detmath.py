"""Bit-deterministic primitives for the mock backend.

Everything here must produce identical results on every platform, so no
libm transcendentals are used on any hash-derived path: randomness comes
from SHA-256 seeded SplitMix64 integer mixing, and tones come from a Taylor
expansion of one angular step plus a two-term linear recurrence, computed
for a single waveform period and tiled. All floating point is IEEE double
with a fixed operation order.
"""
from __future__ import annotations

import hashlib
import math
from functools import lru_cache

import numpy as np

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)

# 53-bit mantissa scale for uniform doubles in [0, 1).
_INV_2_53 = 1.0 / float(1 << 53)


def stable_hash(*parts: str) -> int:
    """64-bit content hash of the joined parts (SHA-256 prefix)."""
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First n outputs of SplitMix64 as a uint64 array.

    Stateless form: output i mixes seed + (i+1) * golden, so the whole
    stream vectorizes.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    index = np.arange(1, n + 1, dtype=np.uint64)
    z = _U64(seed & 0xFFFFFFFFFFFFFFFF) + index * _GOLDEN
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


def uniform(seed: int, n: int) -> np.ndarray:
    """n doubles in [0, 1), identical on every platform."""
    return (splitmix64(seed, n) >> _U64(11)).astype(np.float64) * _INV_2_53


def noise(seed: int, n: int, amplitude: float) -> np.ndarray:
    """Uniform noise in [-amplitude, amplitude)."""
    return (uniform(seed, n) * 2.0 - 1.0) * amplitude


def _cos_series(x: float) -> float:
    # Maclaurin series; |x| stays below ~0.16 for all mock tone steps, so a
    # fixed 12 terms is far past double precision.
    x2 = x * x
    term = 1.0
    total = 1.0
    for k in range(1, 12):
        term *= -x2 / ((2 * k - 1) * (2 * k))
        total += term
    return total


def _sin_series(x: float) -> float:
    x2 = x * x
    term = x
    total = x
    for k in range(1, 12):
        term *= -x2 / ((2 * k) * (2 * k + 1))
        total += term
    return total


@lru_cache(maxsize=256)
def _sine_period(freq: int, sample_rate: int) -> np.ndarray:
    """One full repeating period of sin(2*pi*freq*t) at the given rate."""
    period = sample_rate // math.gcd(freq, sample_rate)
    omega = math.tau * freq / sample_rate
    c = 2.0 * _cos_series(omega)
    samples = np.empty(period, dtype=np.float64)
    samples[0] = 0.0
    if period > 1:
        samples[1] = _sin_series(omega)
    for i in range(2, period):
        samples[i] = c * samples[i - 1] - samples[i - 2]
    samples.setflags(write=False)
    return samples


def sine(freq: int, n: int, sample_rate: int, amplitude: float) -> np.ndarray:
    """n samples of a sine tone, bit-identical across platforms."""
    if n <= 0:
        return np.zeros(0, dtype=np.float64)
    if freq <= 0:
        return np.zeros(n, dtype=np.float64)
    period = _sine_period(int(freq), int(sample_rate))
    reps = -(-n // len(period))
    return np.tile(period, reps)[:n] * amplitude
