"""Seedable 64-bit PRNG usable from numba kernels.

xoshiro256** with state expanded from a single 64-bit seed by splitmix64.
State lives in a ``uint64[4]`` array so it can be passed into jitted code
and copied/compared from Python.
"""

from __future__ import annotations

import numba
import numpy as np

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


def _splitmix64_py(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def seed_state(seed: int) -> np.ndarray:
    """Expand a 64-bit seed into a fresh xoshiro256** state."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    state = np.empty(4, dtype=np.uint64)
    x = seed
    for i in range(4):
        x, z = _splitmix64_py(x)
        state[i] = z
    return state


def replication_seed(base_seed: int, index: int, stream: int = 0) -> int:
    """Seed for replication ``index`` as a pure function of its inputs.

    ``stream`` separates independent seed families drawn from the same base
    (e.g. candidate runs vs. baseline runs) so their ranges never overlap.
    """
    ss = np.random.SeedSequence([base_seed, stream, index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@numba.njit(inline="always")
def _rotl(x, k):
    return (x << _U64(k)) | (x >> _U64(64 - k))


@numba.njit
def next_u64(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s1 * _U64(5), 7) * _U64(9)
    t = s1 << _U64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@numba.njit
def randbelow(state, n):
    """Uniform integer in ``[0, n)``, unbiased.

    For ``n < 2**32`` uses Lemire's multiply-shift on the top 32 bits of a
    draw (rejection only in the rare low-product case); larger bounds fall
    back to modulo rejection on the full 64 bits.
    """
    un = _U64(n)
    if un < _U64(4294967296):
        mask = _U64(0xFFFFFFFF)
        m = (next_u64(state) >> _U64(32)) * un
        low = m & mask
        if low < un:
            threshold = (_U64(4294967296) - un) % un
            while low < threshold:
                m = (next_u64(state) >> _U64(32)) * un
                low = m & mask
        return np.int64(m >> _U64(32))
    threshold = (_U64(0) - un) % un
    while True:
        r = next_u64(state)
        if r >= threshold:
            return np.int64(r % un)
