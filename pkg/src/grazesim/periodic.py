"""Maximal periodic solutions of the deterministic Nordmark map.

A maximal period-n solution has one point with x >= 0 followed by n - 1
points with x <= 0. Its n-th iterate map is smooth away from x = 0, which
makes the fixed-point condition solvable in closed form as a quadratic in
sqrt(x*).

Eliminating y* from the two fixed-point equations gives mu(x*) with
numerator ``a12 * chi * sqrt(x*) + c2 * x*``, where a12 is the (1,2) entry
of A^n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateDenominator, ZeroXStar
from .nordmark import MapParams
from .smallmat import eig2, mat2_pow

STABILITY_MARGIN = 1e-12
DEFAULT_N_MAX = 5


def nth_power_data(p: MapParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (A^n, b^(n)) with b^(n) = (I + A + ... + A^(n-1)) (0, 1)^T."""
    if n < 1:
        raise ValueError("n must be >= 1")
    A = p.A
    b = np.array([0.0, 1.0])
    for _ in range(n - 1):
        b = A @ b + np.array([0.0, 1.0])
    return mat2_pow(A, n), b


def _coefficients(p: MapParams, n: int):
    An, b = nth_power_data(p, n)
    (a11, a12), (a21, a22) = An
    denom = (1.0 - a22) * b[0] + a12 * b[1]
    c1 = a12 * p.chi
    c2 = (1.0 - a11) * (1.0 - a22) - a12 * a21
    return An, b, denom, c1, c2


def solve_for_mu(p: MapParams, n: int, x_star: float) -> tuple[float, float]:
    """mu and y* of the maximal period-n solution whose right point has x = x_star."""
    if x_star < 0.0:
        raise ValueError("x_star must be non-negative")
    An, b, denom, c1, c2 = _coefficients(p, n)
    if abs(denom) < 1e-14:
        raise DegenerateDenominator(f"(1-a22) b1 + a12 b2 = {denom:.3e}")
    (a11, a12), (a21, a22) = An
    s = math.sqrt(x_star)
    mu = (c1 * s + c2 * x_star) / denom
    y_star = ((a12 * b[1] - a22 * b[0]) * p.chi * s
              + ((1.0 - a11) * b[1] + a21 * b[0]) * x_star) / denom
    return mu, y_star


def solve_for_x(p: MapParams, n: int) -> list[float]:
    """All x* >= 0 solving the fixed-point condition at ``p.mu``, ascending.

    The condition is c2 s^2 + c1 s - mu * denom = 0 in s = sqrt(x*) >= 0.
    """
    _, _, denom, c1, c2 = _coefficients(p, n)
    c0 = -p.mu * denom
    scale = max(abs(c2), abs(c1), abs(c0))
    if scale == 0.0:
        return []
    roots: list[float] = []
    if abs(c2) <= 1e-15 * scale:
        if c1 != 0.0:
            roots = [-c0 / c1]
    else:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            if disc < -1e-14 * (c1 * c1 + abs(4.0 * c2 * c0)):
                return []
            disc = 0.0
        r = math.sqrt(disc)
        # stable pair: q has no cancellation, second root from the product
        q = -0.5 * (c1 + math.copysign(r, c1)) if c1 != 0.0 else -0.5 * r
        if q != 0.0:
            roots = [q / c2, c0 / q]
        else:
            roots = [0.0, 0.0] if c0 == 0.0 else []
    xs = sorted({s * s for s in roots if s >= 0.0})
    return xs


class Stability(NamedTuple):
    K: np.ndarray
    multipliers: tuple[complex, complex]
    stable: bool
    marginal: bool


def kink_jacobian(chi: int, x_star: float) -> np.ndarray:
    """Jacobian of x, y -> (x, y - chi sqrt(x)) at x = x_star > 0."""
    return np.array([[1.0, 0.0], [-chi / (2.0 * math.sqrt(x_star)), 1.0]])


def stability(p: MapParams, n: int, x_star: float) -> Stability:
    if x_star <= 0.0:
        raise ZeroXStar("stability is undefined at x* <= 0 (grazing point)")
    An, _ = nth_power_data(p, n)
    K = An @ kink_jacobian(p.chi, x_star)
    lam = eig2(K)
    rho = abs(lam[0])
    stable = rho < 1.0 - STABILITY_MARGIN
    marginal = not stable and rho <= 1.0 + STABILITY_MARGIN
    return Stability(K, lam, stable, marginal)


@dataclass(frozen=True)
class PeriodicSolution:
    n: int
    points: np.ndarray  # (n, 2), index 0 is the right-half-plane point
    x_star: float
    y_star: float
    mu: float
    multipliers: tuple[complex, complex]
    stable: bool
    admissible: bool
    marginal: bool = False

    @property
    def attracting(self) -> bool:
        return self.stable and self.admissible


def orbit_points(p: MapParams, n: int, x_star: float, y_star: float) -> np.ndarray:
    """Points of the solution using the branches a maximal solution assumes.

    The first step uses the square-root branch and the rest the left branch,
    regardless of the sign of x, so virtual solutions are reported too.
    """
    A = p.A
    pts = np.empty((n, 2))
    pts[0] = (x_star, y_star)
    z = A @ np.array([x_star, y_star - p.chi * math.sqrt(x_star)]) + (0.0, p.mu)
    for i in range(1, n):
        pts[i] = z
        z = A @ z + (0.0, p.mu)
    return pts


def admissibility(p: MapParams, n: int, solution) -> bool:
    pts = solution.points if isinstance(solution, PeriodicSolution) else np.asarray(solution)
    return bool(pts[0, 0] >= 0.0 and np.all(pts[1:n, 0] <= 0.0))


def maximal_solutions(p: MapParams, n: int) -> list[PeriodicSolution]:
    """Every maximal period-n solution at ``p.mu`` (admissible or not)."""
    out = []
    for x_star in solve_for_x(p, n):
        if x_star == 0.0:
            # grazing fixed point; multipliers undefined
            continue
        _, y_star = solve_for_mu(p, n, x_star)
        pts = orbit_points(p, n, x_star, y_star)
        st = stability(p, n, x_star)
        out.append(PeriodicSolution(
            n=n, points=pts, x_star=x_star, y_star=y_star, mu=p.mu,
            multipliers=st.multipliers, stable=st.stable,
            admissible=admissibility(p, n, pts), marginal=st.marginal,
        ))
    return out


def attracting_solutions(p: MapParams, n_max: int = DEFAULT_N_MAX) -> list[PeriodicSolution]:
    """Stable, admissible maximal solutions with period <= n_max, by n."""
    return [s for n in range(1, n_max + 1) for s in maximal_solutions(p, n) if s.attracting]


def branch_sweep(p: MapParams, mus, n_max: int = DEFAULT_N_MAX) -> list[tuple[float, PeriodicSolution]]:
    """(mu, solution) for every attracting maximal solution on the mu grid.

    Ordered by mu then n. For mu <= 0 the only candidate attractor is the
    admissible left fixed point, which is not a maximal solution and so is
    not listed here; see :func:`grazesim.nordmark.left_fixed_point`.
    """
    rows = []
    for mu in np.asarray(mus, dtype=float):
        for sol in attracting_solutions(p.with_mu(float(mu)), n_max):
            rows.append((float(mu), sol))
    return rows


def period_windows(p: MapParams, mus, n_max: int = DEFAULT_N_MAX) -> dict[int, tuple[float, float]]:
    """For each n, the smallest and largest grid mu with an attracting period-n solution."""
    wins: dict[int, list[float]] = {}
    for mu, sol in branch_sweep(p, mus, n_max):
        wins.setdefault(sol.n, []).append(mu)
    return {n: (min(v), max(v)) for n, v in sorted(wins.items())}
