"""The two-dimensional Nordmark map in normal form, with and without noise.

    (x, y) -> A (x, y)^T + (0, mu)^T                  for x <= 0
    (x, y) -> A (x, y - chi sqrt(x))^T + (0, mu)^T     for x > 0

with A = [[tau, 1], [-delta, 0]]. The stochastic map adds eps * xi,
xi ~ N(0, theta), after every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DegenerateDenominator, Diverged
from .noise import NoiseSpec, NoiseStream, sample_xi, sample_xi_block

DIVERGENCE_BOUND = 1e6
DEFAULT_BLOCK = 1 << 16


@dataclass(frozen=True)
class MapParams:
    tau: float
    delta: float
    chi: int
    mu: float = 0.0

    def __post_init__(self):
        if self.chi not in (-1, 1):
            raise ValueError(f"chi must be -1 or +1, got {self.chi}")
        for name in ("tau", "delta", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def A(self) -> np.ndarray:
        return np.array([[self.tau, 1.0], [-self.delta, 0.0]])

    @property
    def grazing_orbit_attracting(self) -> bool:
        """Both eigenvalues of A strictly inside the unit circle."""
        return abs(self.delta) < 1.0 and abs(self.tau) < 1.0 + self.delta

    def with_mu(self, mu: float) -> MapParams:
        return MapParams(self.tau, self.delta, self.chi, mu)


@numba.njit(cache=True, inline="always")
def _step(tau, delta, chi, mu, x, y):
    if x > 0.0:
        y = y - chi * math.sqrt(x)
    return tau * x + y, -delta * x + mu


def step_det(p: MapParams, s) -> np.ndarray:
    x, y = float(s[0]), float(s[1])
    if x > 0.0:
        y -= p.chi * math.sqrt(x)
    return np.array([p.tau * x + y, -p.delta * x + p.mu])


def step_stoch(p: MapParams, noise: NoiseSpec, stream: NoiseStream, s) -> np.ndarray:
    return step_det(p, s) + noise.eps * sample_xi(noise, stream)


def left_fixed_point(p: MapParams) -> tuple[np.ndarray, bool]:
    """Fixed point of the left half-map and whether it is admissible (x <= 0)."""
    den = 1.0 - p.tau + p.delta
    if abs(den) < 1e-14:
        raise DegenerateDenominator("1 - tau + delta vanishes")
    x = p.mu / den
    return np.array([x, (1.0 - p.tau) * x]), x <= 0.0


@numba.njit(cache=True)
def _orbit_block(tau, delta, chi, mu, x, y, kicks, xs, ys, bound):
    """Advance through ``len(kicks)`` steps, storing states; returns the
    final state and the index of the first divergent state (-1 if none)."""
    for i in range(kicks.shape[0]):
        x, y = _step(tau, delta, chi, mu, x, y)
        x += kicks[i, 0]
        y += kicks[i, 1]
        xs[i] = x
        ys[i] = y
        if not (abs(x) <= bound and abs(y) <= bound):
            return x, y, i
    return x, y, -1


def _kicks(noise: NoiseSpec | None, stream: NoiseStream | None, n: int) -> np.ndarray:
    if noise is None or noise.eps == 0.0:
        return np.zeros((n, 2))
    return noise.eps * sample_xi_block(noise, stream, n)


def iterate(p: MapParams, noise: NoiseSpec | None, stream: NoiseStream | None, s0,
            count: int, discard: int = 0, sink=None, block: int = DEFAULT_BLOCK):
    """Iterate the (stochastic) map.

    The first ``discard`` iterates are dropped. Without a ``sink`` the
    remaining ``count`` states are returned as ``(xs, ys)`` arrays. With a
    sink, ``sink(xs, ys)`` is called once per block (memory stays bounded)
    and the final state is returned instead.

    Raises :class:`Diverged` if |x| or |y| exceeds 1e6.
    """
    if count < 1 or discard < 0:
        raise ValueError("need count >= 1 and discard >= 0")
    x, y = float(s0[0]), float(s0[1])
    total = discard + count
    if sink is None:
        xs_all = np.empty(count)
        ys_all = np.empty(count)
    done = 0
    xs_buf = np.empty(min(block, total))
    ys_buf = np.empty(min(block, total))
    while done < total:
        m = min(block, total - done)
        kicks = _kicks(noise, stream, m)
        xs, ys = xs_buf[:m], ys_buf[:m]
        x, y, bad = _orbit_block(p.tau, p.delta, p.chi, p.mu, x, y, kicks, xs, ys,
                                 DIVERGENCE_BOUND)
        if bad >= 0:
            raise Diverged(done + bad, (x, y))
        lo = max(discard - done, 0)
        if lo < m:
            if sink is None:
                k0 = done + lo - discard
                xs_all[k0:k0 + m - lo] = xs[lo:]
                ys_all[k0:k0 + m - lo] = ys[lo:]
            else:
                sink(xs[lo:], ys[lo:])
        done += m
    if sink is None:
        return xs_all, ys_all
    return np.array([x, y])
