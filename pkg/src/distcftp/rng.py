"""Counter-keyed pseudorandom function.

Every random quantity used by the samplers is ``uniform(seed, t, stream, index)``:
a SplitMix64 finalizer chained over the seed, the time index, and a
(stream, index) word. Nothing is stateful, so a value can be regenerated at
any later point, by any party, and come out bit-identical.

The scalar, numpy, and numba versions must agree bit for bit; the tests check it.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

MASK64 = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SEED_SALT = 0x9E3779B97F4A7C15
_INV53 = 1.0 / (1 << 53)

# streams
MARK = 1
PROPOSAL = 2
FILTER = 3
SITE = 4
COIN = 5


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def seed_key(seed: int) -> int:
    return mix64((seed & MASK64) ^ _SEED_SALT)


def time_key(seed: int, t: int) -> int:
    return mix64(seed_key(seed) ^ (t & MASK64))


def word(stream: int, index: int) -> int:
    return ((stream & 0xFF) << 56) | (index & ((1 << 56) - 1))


def uniform(seed: int, t: int, stream: int, index: int) -> float:
    """Uniform double in [0, 1) with 53 random bits."""
    return (mix64(time_key(seed, t) ^ word(stream, index)) >> 11) * _INV53


def raw64(seed: int, t: int, stream: int, index: int) -> int:
    return mix64(time_key(seed, t) ^ word(stream, index))


# -- numpy --------------------------------------------------------------------

_M1_NP = np.uint64(_M1)
_M2_NP = np.uint64(_M2)


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _M1_NP
    z ^= z >> np.uint64(27)
    z *= _M2_NP
    z ^= z >> np.uint64(31)
    return z


def uniform_np(seed: int, t: int, stream: int, index: np.ndarray) -> np.ndarray:
    base = np.uint64(time_key(seed, t) ^ ((stream & 0xFF) << 56))
    z = mix64_np(np.asarray(index, dtype=np.uint64) ^ base)
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


# -- numba --------------------------------------------------------------------

_SALT_NB = np.uint64(_SEED_SALT)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S56 = np.uint64(56)


@njit(cache=True)
def mix64_nb(z):
    z = (z ^ (z >> _S30)) * _M1_NP
    z = (z ^ (z >> _S27)) * _M2_NP
    return z ^ (z >> _S31)


@njit(cache=True)
def time_key_nb(seed_u64, t):
    return mix64_nb(mix64_nb(np.uint64(seed_u64) ^ _SALT_NB) ^ np.uint64(t))


@njit(cache=True)
def uniform_nb(tkey, stream, index):
    z = mix64_nb(np.uint64(tkey) ^ ((np.uint64(stream) << _S56) | np.uint64(index)))
    return np.float64(z >> _S11) * _INV53
