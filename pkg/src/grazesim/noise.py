"""Reproducible correlated Gaussian noise.

Samples come from numpy's Philox counter-based generator keyed by
``(seed, stream_id)``; standard normals are produced by the inverse normal
CDF applied to one 64-bit draw each. Because exactly one raw draw feeds one
normal, a stream yields the same sequence no matter how requests are blocked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .smallmat import SymMat2, chol2

_U64 = (1 << 64) - 1


def parse_uint64(value) -> int:
    """Accept an int or a decimal / 0x-hex string; check the uint64 range."""
    if isinstance(value, str):
        value = int(value.strip(), 0)
    value = int(value)
    if not 0 <= value <= _U64:
        raise ValueError(f"{value} is not a 64-bit unsigned integer")
    return value


@dataclass(frozen=True)
class NoiseSpec:
    """Noise amplitude ``eps`` and covariance ``theta`` of the unscaled draw."""

    eps: float
    theta: SymMat2
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.eps >= 0.0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        # chol2 validates positive-semidefiniteness
        object.__setattr__(self, "chol", chol2(self.theta))

    def with_eps(self, eps: float) -> NoiseSpec:
        return NoiseSpec(eps, self.theta)


class NoiseStream:
    """A single-owner stream of uniforms / standard normals.

    Use :func:`split` to get independent children for parallel work; the
    parent is consumed by splitting.
    """

    def __init__(self, seed=0, stream_id=0):
        self.seed = parse_uint64(seed)
        self.stream_id = parse_uint64(stream_id)
        self._bitgen = np.random.Philox(key=self.seed | (self.stream_id << 64))
        self.consumed = 0
        self._spent = False

    def __repr__(self):
        return f"NoiseStream(seed={self.seed:#x}, stream_id={self.stream_id:#x}, consumed={self.consumed})"

    def _check(self):
        if self._spent:
            raise RuntimeError("noise stream was consumed by split()")

    def raw(self, n: int) -> np.ndarray:
        self._check()
        out = self._bitgen.random_raw(n)
        self.consumed += n
        return out

    def uniform(self, n: int) -> np.ndarray:
        """Uniforms on the open interval (0, 1) at 53-bit resolution."""
        r = self.raw(n) >> np.uint64(11)
        return (r.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)

    def standard_normal(self, n: int) -> np.ndarray:
        return ndtri(self.uniform(n))


def split(stream: NoiseStream, k: int) -> list[NoiseStream]:
    """Derive ``k`` child streams deterministically from the parent's state."""
    if k < 1:
        raise ValueError("k must be >= 1")
    stream._check()
    ss = np.random.SeedSequence(
        [stream.seed & 0xFFFFFFFF, stream.seed >> 32,
         stream.stream_id & 0xFFFFFFFF, stream.stream_id >> 32,
         stream.consumed & 0xFFFFFFFF, stream.consumed >> 32]
    )
    words = ss.generate_state(2 * k, dtype=np.uint32)
    ids = [int(words[2 * j]) | (int(words[2 * j + 1]) << 32) for j in range(k)]
    stream._spent = True
    return [NoiseStream(stream.seed, i) for i in ids]


def sample_xi(spec: NoiseSpec, stream: NoiseStream) -> np.ndarray:
    """One draw of xi ~ N(0, theta); not scaled by eps."""
    return spec.chol @ stream.standard_normal(2)


def sample_xi_block(spec: NoiseSpec, stream: NoiseStream, n: int) -> np.ndarray:
    """``n`` consecutive draws as an (n, 2) array, identical to n calls of sample_xi."""
    z = stream.standard_normal(2 * n).reshape(n, 2)
    return z @ spec.chol.T
