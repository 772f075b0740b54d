"""Deterministic, splittable random number generation.

Streams are counter based: word ``k`` of a stream is a 64-bit hash of
``key + (k + 1) * GOLDEN``, where the key mixes the master seed with the
stream id.  Nothing is mutated when drawing, so results never depend on
call order, sharding, or thread scheduling; independent consumers take
independent substreams instead of sharing a cursor.

The mixing function is the SplitMix64 finalizer with the usual constants
(GOLDEN = 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB, shifts 30/27/31).  Uniform doubles are built from the
top 53 bits as ``(bits + 1) * 2**-53``, which lands in (0, 1] so logs in
the Gaussian transform are always finite.  Normals come from Box-Muller
on consecutive word pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .linalg import SpdFactor

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

_U64_GOLDEN = np.uint64(GOLDEN)
_U64_MULT1 = np.uint64(_MULT1)
_U64_MULT2 = np.uint64(_MULT2)
_U64_30 = np.uint64(30)
_U64_27 = np.uint64(27)
_U64_31 = np.uint64(31)
_U64_11 = np.uint64(11)
_INV_2_53 = 2.0 ** -53


def mix64(value: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & _MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64_30)) * _U64_MULT1
    z = (z ^ (z >> _U64_27)) * _U64_MULT2
    return z ^ (z >> _U64_31)


@dataclass(frozen=True)
class RandomSource:
    """An immutable handle on one random stream.

    A source denotes a fixed infinite sequence of words; drawing from it
    twice returns the same values.  Use :meth:`substream` to obtain
    streams that are independent of this one and of each other.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, int):
                raise DomainError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, value & _MASK64)

    @property
    def _key(self) -> int:
        return mix64(mix64(self.master_seed) ^ self.stream_id)

    def substream(self, index: int) -> "RandomSource":
        """Child stream; distinct indexes give independent streams."""
        if not isinstance(index, int) or index < 0:
            raise DomainError(f"substream index must be a non-negative integer, got {index!r}")
        child = mix64((self.stream_id ^ ((index + 1) * GOLDEN)) & _MASK64)
        return RandomSource(self.master_seed, child)

    def words(self, count: int, start: int = 0) -> np.ndarray:
        """Raw 64-bit stream words [start, start + count)."""
        if not isinstance(count, int) or count < 0:
            raise DomainError(f"word count must be a non-negative integer, got {count!r}")
        if not isinstance(start, int) or start < 0:
            raise DomainError(f"word start must be a non-negative integer, got {start!r}")
        counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        key = np.uint64(self._key)
        return _mix64_array(counters * _U64_GOLDEN + key)

    def uniforms(self, count: int, start: int = 0) -> np.ndarray:
        """count doubles uniform on (0, 1]."""
        bits = self.words(count, start) >> _U64_11
        return (bits.astype(np.float64) + 1.0) * _INV_2_53

    def normals(self, count: int) -> np.ndarray:
        """count standard normal doubles via Box-Muller."""
        if not isinstance(count, int) or count < 0:
            raise DomainError(f"normal count must be a non-negative integer, got {count!r}")
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        radius = np.sqrt(-2.0 * np.log(u[0::2]))
        angle = (2.0 * np.pi) * u[1::2]
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]


def derive_stream(master_seed: int, replicate_index: int) -> RandomSource:
    """Stream for one replicate; injective in replicate_index per seed."""
    if not isinstance(master_seed, int):
        raise DomainError(f"master_seed must be an integer, got {master_seed!r}")
    if not isinstance(replicate_index, int) or replicate_index < 0:
        raise DomainError(
            f"replicate_index must be a non-negative integer, got {replicate_index!r}"
        )
    stream = mix64(((replicate_index + 1) * GOLDEN) & _MASK64)
    return RandomSource(master_seed, stream)


def mvn_sample(source: RandomSource, mean, factor: SpdFactor, count: int) -> np.ndarray:
    """count draws from N(mean, L @ L.T) as a (count, dim) matrix."""
    if not isinstance(count, int) or count < 1:
        raise DomainError(f"sample count must be a positive integer, got {count!r}")
    mu = np.asarray(mean, dtype=float)
    dim = factor.dim
    if mu.shape != (dim,):
        raise DomainError(f"mean has shape {mu.shape}, expected ({dim},)")
    if not np.isfinite(mu).all():
        raise DomainError("mean contains non-finite entries")
    z = source.normals(count * dim).reshape(count, dim)
    return mu + z @ factor.lower.T
