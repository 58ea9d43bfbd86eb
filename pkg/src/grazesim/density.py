"""Monte Carlo estimates of invariant densities and orbit statistics.

Everything streams over a single long orbit in blocks (ergodicity is assumed,
so time averages stand in for ensemble averages); memory does not grow with
the number of iterates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceChain
from .errors import NoReturns
from .noise import NoiseSpec, NoiseStream, split
from .nordmark import MapParams, iterate
from .periodic import PeriodicSolution
from .smallmat import SymMat2

DEFAULT_DISCARD = 10_000
DEFAULT_BINS = 512
AUTO_RANGE_SIGMAS = 5.0
PILOT_SIZE = 100_000

# 2-point Gauss-Legendre nodes on [-1, 1]
_GL_NODES = np.array([-1.0, 1.0]) / math.sqrt(3.0)


@dataclass(frozen=True)
class Grid:
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    nx: int = DEFAULT_BINS
    ny: int = DEFAULT_BINS

    @property
    def x_edges(self) -> np.ndarray:
        return np.linspace(*self.xlim, self.nx + 1)

    @property
    def y_edges(self) -> np.ndarray:
        return np.linspace(*self.ylim, self.ny + 1)

    def refined(self, factor: int = 2) -> Grid:
        return Grid(self.xlim, self.ylim, self.nx * factor, self.ny * factor)


@dataclass
class Histogram2D:
    grid: Grid
    counts: np.ndarray = field(repr=False)
    total: int = 0
    out_of_range: int = 0

    @classmethod
    def empty(cls, grid: Grid) -> Histogram2D:
        return cls(grid, np.zeros((grid.nx, grid.ny), dtype=np.int64))

    def add(self, xs, ys) -> None:
        g = self.grid
        ix = np.floor((xs - g.xlim[0]) * (g.nx / (g.xlim[1] - g.xlim[0]))).astype(np.int64)
        iy = np.floor((ys - g.ylim[0]) * (g.ny / (g.ylim[1] - g.ylim[0]))).astype(np.int64)
        ok = (ix >= 0) & (ix < g.nx) & (iy >= 0) & (iy < g.ny)
        flat = ix[ok] * g.ny + iy[ok]
        self.counts += np.bincount(flat, minlength=g.nx * g.ny).reshape(g.nx, g.ny)
        self.total += len(xs)
        self.out_of_range += int(len(xs) - ok.sum())

    def merge(self, other: Histogram2D) -> Histogram2D:
        if other.grid != self.grid:
            raise ValueError("cannot merge histograms on different grids")
        return Histogram2D(self.grid, self.counts + other.counts,
                           self.total + other.total, self.out_of_range + other.out_of_range)

    def probability(self) -> np.ndarray:
        """Per-bin probability mass (sums to the in-range fraction)."""
        return self.counts / max(self.total, 1)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xe, ye = self.grid.x_edges, self.grid.y_edges
        return 0.5 * (xe[:-1] + xe[1:]), 0.5 * (ye[:-1] + ye[1:])


def auto_grid(xs, ys, nx: int = DEFAULT_BINS, ny: int = DEFAULT_BINS) -> Grid:
    """mean +- 5 std per axis; a tiny window when a coordinate is constant."""
    lims = []
    for v in (xs, ys):
        m, s = float(np.mean(v)), float(np.std(v))
        half = AUTO_RANGE_SIGMAS * s if s > 0 else 1e-6 * max(1.0, abs(m))
        lims.append((m - half, m + half))
    return Grid(lims[0], lims[1], nx, ny)


def estimate_density(p: MapParams, noise: NoiseSpec, stream: NoiseStream, s0,
                     iterates: int, discard: int = DEFAULT_DISCARD,
                     grid: Grid | None = None) -> Histogram2D:
    """Bin ``iterates`` consecutive post-transient states into a 2D histogram.

    Without a grid, the range is fixed from the first block of the orbit
    (up to 1e5 states), which is then binned along with the rest.
    """
    state = {"hist": Histogram2D.empty(grid) if grid is not None else None}

    def sink(xs, ys):
        h = state["hist"]
        if h is None:
            h = state["hist"] = Histogram2D.empty(auto_grid(xs, ys))
        h.add(xs, ys)

    iterate(p, noise, stream, s0, iterates, discard, sink=sink,
            block=PILOT_SIZE if grid is None else 1 << 16)
    return state["hist"]


@dataclass(frozen=True)
class ClusterStats:
    center: np.ndarray
    mean: np.ndarray
    cov: SymMat2
    weight: float
    count: int


class _ClusterAccumulator:
    def __init__(self, centers: np.ndarray, radius):
        self.centers = np.asarray(centers, dtype=float)
        self.radius = np.broadcast_to(np.asarray(radius, dtype=float), (len(self.centers),))
        k = len(self.centers)
        self.n = np.zeros(k, dtype=np.int64)
        # sums of dx, dy, dx^2, dxdy, dy^2 relative to each center
        self.s = np.zeros((k, 5))
        self.total = 0

    def __call__(self, xs, ys):
        dx = xs[:, None] - self.centers[None, :, 0]
        dy = ys[:, None] - self.centers[None, :, 1]
        d2 = dx * dx + dy * dy
        j = np.argmin(d2, axis=1)
        rows = np.arange(len(xs))
        ok = d2[rows, j] <= self.radius[j] ** 2
        jx, ddx, ddy = j[ok], dx[rows, j][ok], dy[rows, j][ok]
        k = len(self.centers)
        self.n += np.bincount(jx, minlength=k)
        for col, v in enumerate((ddx, ddy, ddx * ddx, ddx * ddy, ddy * ddy)):
            self.s[:, col] += np.bincount(jx, weights=v, minlength=k)
        self.total += len(xs)

    def result(self) -> tuple[list[ClusterStats], float]:
        out = []
        for c, n, s in zip(self.centers, self.n, self.s):
            if n == 0:
                out.append(ClusterStats(c, c.copy(), SymMat2.zero(), 0.0, 0))
                continue
            mx, my = s[0] / n, s[1] / n
            # population covariance; clusters hold ~1e6 points
            cov = SymMat2(s[2] / n - mx * mx, s[3] / n - mx * my, s[4] / n - my * my)
            out.append(ClusterStats(c, c + (mx, my), cov, n / self.total, int(n)))
        unassigned = (self.total - int(self.n.sum())) / self.total
        return out, unassigned


def default_radius(solution: PeriodicSolution) -> np.ndarray:
    """Per-point radius: half the distance from each point to its nearest neighbour.

    Assignment inside these radii is unambiguous (the disks are disjoint) and,
    unlike a single global radius, does not truncate a broad cluster just
    because two other points happen to be close together.
    """
    pts = solution.points
    if len(pts) < 2:
        return np.full(len(pts), math.inf)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(d, math.inf)
    return 0.5 * d.min(axis=1)


def cluster_stats(orbit, solution: PeriodicSolution, radius=None):
    """Assign orbit points to the nearest solution point within ``radius``.

    ``radius`` is a scalar or one value per point (default
    :func:`default_radius`). ``orbit`` is an ``(xs, ys)`` pair. Returns
    ``(stats, unassigned_fraction)``.
    """
    acc = _ClusterAccumulator(solution.points, default_radius(solution) if radius is None else radius)
    xs, ys = orbit
    acc(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    return acc.result()


def cluster_stats_stream(p: MapParams, noise: NoiseSpec, stream: NoiseStream,
                         solution: PeriodicSolution, iterates: int,
                         discard: int = DEFAULT_DISCARD, radius=None, s0=None):
    """Streaming version of :func:`cluster_stats` over a fresh orbit."""
    acc = _ClusterAccumulator(solution.points, default_radius(solution) if radius is None else radius)
    start = solution.points[0] if s0 is None else s0
    iterate(p, noise, stream, start, iterates, discard, sink=acc)
    return acc.result()


class _ReturnCounter:
    """Counts return times to x > 0 across block boundaries."""

    def __init__(self, n: int):
        self.n = n
        self.offset = 0
        self.last = -1
        self.returns = 0
        self.hits = 0

    def __call__(self, xs, ys):
        idx = np.flatnonzero(xs > 0.0) + self.offset
        if len(idx):
            if self.last >= 0:
                gaps = np.diff(np.concatenate(([self.last], idx)))
            else:
                gaps = np.diff(idx)
            self.returns += len(gaps)
            self.hits += int(np.count_nonzero(gaps == self.n))
            self.last = int(idx[-1])
        self.offset += len(xs)


@dataclass(frozen=True)
class FractionResult:
    fraction: float
    returns: int
    hits: int


def period_fraction(p: MapParams, noise: NoiseSpec, stream: NoiseStream, n: int,
                    iterates: int, discard: int = DEFAULT_DISCARD, s0=None) -> FractionResult:
    """Fraction of right-half-plane visits whose next visit is exactly n steps later."""
    if iterates < 10_000:
        raise ValueError("period_fraction needs at least 1e4 iterates")
    counter = _ReturnCounter(n)
    iterate(p, noise, stream, (0.0, 0.0) if s0 is None else s0, iterates, discard, sink=counter)
    if counter.returns == 0:
        raise NoReturns("no return to x > 0 observed")
    return FractionResult(counter.hits / counter.returns, counter.returns, counter.hits)


class _MomentAccumulator:
    """Chunked mean / covariance (Chan's parallel update) plus batch means."""

    def __init__(self, batches: int, iterates: int):
        self.n = 0
        self.mean = np.zeros(2)
        self.m2 = np.zeros((2, 2))
        self.batch_size = max(iterates // batches, 1)
        self._batch: list[np.ndarray] = []
        self._pending = np.empty((0, 2))
        self.batch_covs: list[np.ndarray] = []

    def __call__(self, xs, ys):
        z = np.column_stack((xs, ys))
        nb = len(z)
        mb = z.mean(axis=0)
        dz = z - mb
        m2b = dz.T @ dz
        delta = mb - self.mean
        tot = self.n + nb
        self.m2 += m2b + np.outer(delta, delta) * (self.n * nb / tot)
        self.mean += delta * (nb / tot)
        self.n = tot
        pend = np.vstack((self._pending, z))
        k = len(pend) // self.batch_size
        for i in range(k):
            b = pend[i * self.batch_size:(i + 1) * self.batch_size]
            self.batch_covs.append(np.cov(b.T, bias=True))
        self._pending = pend[k * self.batch_size:]

    def cov(self) -> np.ndarray:
        return self.m2 / self.n

    def cov_standard_error(self) -> np.ndarray:
        """Batch-means standard error of each covariance entry."""
        b = np.array(self.batch_covs)
        if len(b) < 2:
            return np.full((2, 2), np.inf)
        return b.std(axis=0, ddof=1) / math.sqrt(len(b))


@dataclass(frozen=True)
class OrbitMoments:
    mean: np.ndarray
    cov: SymMat2
    cov_se: SymMat2
    iterates: int

    @property
    def std(self) -> np.ndarray:
        return np.sqrt([self.cov.s11, self.cov.s22])


def orbit_moments(p: MapParams, noise: NoiseSpec, stream: NoiseStream, s0, iterates: int,
                  discard: int = DEFAULT_DISCARD, batches: int = 100) -> OrbitMoments:
    """Mean and covariance of a long orbit, with batch-means standard errors."""
    acc = _MomentAccumulator(batches, iterates)
    iterate(p, noise, stream, s0, iterates, discard, sink=acc)
    return OrbitMoments(acc.mean.copy(), SymMat2.from_array(acc.cov()),
                        SymMat2.from_array(acc.cov_standard_error()), acc.n)


def marginal_std_sweep(p: MapParams, noise: NoiseSpec, stream: NoiseStream, eps_list,
                       iterates: int, discard: int = DEFAULT_DISCARD, s0=(0.0, 0.0)):
    """Rows of (eps, std_x, std_y); each eps uses its own split child stream."""
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0.0 for e in eps_list):
        raise ValueError("all eps must be positive")
    children = split(stream, len(eps_list))
    rows = []
    for eps, child in zip(eps_list, children):
        m = orbit_moments(p, noise.with_eps(eps), child, s0, iterates, discard)
        sx, sy = m.std
        rows.append((eps, float(sx), float(sy)))
    return rows


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def fraction_sweep(p: MapParams, noise: NoiseSpec, stream: NoiseStream, n: int, eps_list,
                   iterates: int, discard: int = DEFAULT_DISCARD, s0=None) -> list[tuple[float, FractionResult]]:
    children = split(stream, len(eps_list))
    return [(float(e), period_fraction(p, noise.with_eps(float(e)), c, n, iterates, discard, s0))
            for e, c in zip(eps_list, children)]


def steepest_descent(eps, fractions, smooth: int = 5) -> float:
    """Midpoint eps of the most negative finite-difference slope.

    A centred moving average of width ``smooth`` is applied first (edges use
    the available points).
    """
    eps = np.asarray(eps, dtype=float)
    f = np.asarray(fractions, dtype=float)
    if smooth > 1:
        h = smooth // 2
        f = np.array([f[max(0, i - h):i + h + 1].mean() for i in range(len(f))])
    slopes = np.diff(f) / np.diff(eps)
    i = int(np.argmin(slopes))
    return 0.5 * (eps[i] + eps[i + 1])


@dataclass(frozen=True)
class GaussianMixture:
    means: np.ndarray  # (k, 2)
    covs: list[SymMat2]
    weights: np.ndarray

    def pdf(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for m, c, w in zip(self.means, self.covs, self.weights):
            det = c.det
            if det <= 0.0:
                raise ValueError("degenerate mixture component")
            dx, dy = x - m[0], y - m[1]
            q = (c.s22 * dx * dx - 2.0 * c.s12 * dx * dy + c.s11 * dy * dy) / det
            out += w * np.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(det))
        return out

    def bin_probabilities(self, grid: Grid) -> np.ndarray:
        """Mass per histogram bin by 2-point Gauss-Legendre in each axis."""
        xe, ye = grid.x_edges, grid.y_edges
        hx, hy = np.diff(xe), np.diff(ye)
        cx, cy = 0.5 * (xe[:-1] + xe[1:]), 0.5 * (ye[:-1] + ye[1:])
        total = np.zeros((grid.nx, grid.ny))
        for a in _GL_NODES:
            for b in _GL_NODES:
                X = (cx + 0.5 * hx * a)[:, None]
                Y = (cy + 0.5 * hy * b)[None, :]
                total += self.pdf(X, Y)
        return total * 0.25 * np.outer(hx, hy)


def mixture_from_chain(solution: PeriodicSolution, chain: CovarianceChain, eps: float) -> GaussianMixture:
    if chain.n != solution.n:
        raise ValueError("chain length must equal the solution period")
    n = solution.n
    return GaussianMixture(solution.points.copy(), chain.scaled(eps), np.full(n, 1.0 / n))


def total_variation(hist: Histogram2D, mixture: GaussianMixture) -> float:
    """Total-variation distance on the histogram grid, out-of-range mass included."""
    p_emp = hist.probability()
    p_mix = mixture.bin_probabilities(hist.grid)
    inside = 0.5 * float(np.abs(p_emp - p_mix).sum())
    outside = 0.5 * abs(hist.out_of_range / max(hist.total, 1) - max(0.0, 1.0 - p_mix.sum()))
    return inside + outside


def attractor_weights(p: MapParams, noise: NoiseSpec, stream: NoiseStream, solutions,
                      iterates: int, discard: int = DEFAULT_DISCARD, s0=(0.0, 0.0)):
    """Share of orbit points near each listed solution, and the remainder.

    Points are pooled over all solutions and each iterate is assigned to the
    nearest pooled point within its nearest-neighbour half-distance. The
    remainder covers attractors without a closed form (for instance a
    chaotic band coexisting with a periodic orbit). No prediction is
    attached: the split depends on basin geometry.
    """
    if not solutions:
        raise ValueError("need at least one solution")
    centers = np.concatenate([s.points for s in solutions])
    owner = np.concatenate([np.full(s.n, i) for i, s in enumerate(solutions)])
    pooled = PeriodicSolution(n=len(centers), points=centers, x_star=0.0, y_star=0.0, mu=p.mu,
                              multipliers=(0j, 0j), stable=True, admissible=True)
    acc = _ClusterAccumulator(centers, default_radius(pooled))
    iterate(p, noise, stream, s0, iterates, discard, sink=acc)
    w = np.bincount(owner, weights=acc.n, minlength=len(solutions)) / acc.total
    return w, 1.0 - float(acc.n.sum()) / acc.total
