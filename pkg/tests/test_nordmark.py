import math

import numpy as np
import pytest

from grazesim.errors import DegenerateDenominator, Diverged
from grazesim.noise import NoiseSpec, NoiseStream, sample_xi
from grazesim.nordmark import MapParams, iterate, left_fixed_point, step_det, step_stoch
from grazesim.periodic import attracting_solutions, maximal_solutions
from grazesim.smallmat import SymMat2

P0 = MapParams(0.5, 0.05, 1, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        MapParams(0.5, 0.05, 0)
    with pytest.raises(ValueError):
        MapParams(math.nan, 0.05, 1)
    assert P0.grazing_orbit_attracting
    assert not MapParams(2.5, 0.05, 1).grazing_orbit_attracting
    assert np.array_equal(P0.A, [[0.5, 1.0], [-0.05, 0.0]])


def test_step_examples():
    assert np.array_equal(step_det(P0, (0.0, 0.0)), [0.0, 0.0])
    assert np.allclose(step_det(P0, (-1.0, 0.0)), [-0.5, 0.05], atol=1e-15)
    assert np.allclose(step_det(P0, (1.0, 0.0)), [-0.5, -0.05], atol=1e-15)
    assert np.allclose(step_det(MapParams(0.5, 0.05, -1), (1.0, 0.0)), [1.5, -0.05])


def test_continuity_at_switching_line():
    for y in (-0.3, 0.0, 0.7):
        a = step_det(P0, (1e-12, y))
        b = step_det(P0, (-1e-12, y))
        assert np.abs(a - b).max() <= 1e-5


def test_left_branch_linear(rng):
    p = P0.with_mu(0.02)
    ref = step_det(p, (0.0, 0.0))
    for _ in range(1000):
        s1 = np.array([-rng.uniform(0, 1), rng.normal()])
        s2 = np.array([-rng.uniform(0, 1), rng.normal()])
        a, b = rng.uniform(0, 1, 2)
        lhs = step_det(p, a * s1 + b * s2) - ref
        rhs = a * (step_det(p, s1) - ref) + b * (step_det(p, s2) - ref)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_step_stoch_additive():
    spec = NoiseSpec(1.0, SymMat2.identity())
    s = np.array([0.1, -0.2])
    out = step_stoch(P0, spec, NoiseStream(4), s)
    xi = sample_xi(spec, NoiseStream(4))
    assert np.allclose(out - step_det(P0, s), xi, atol=1e-15)
    quiet = step_stoch(P0, NoiseSpec(0.0, SymMat2.identity()), NoiseStream(4), s)
    assert np.array_equal(quiet, step_det(P0, s))


def test_single_step_covariance():
    # one stochastic step from the origin at mu = 0 is pure noise
    eps, n = 0.01, 10**6
    th = SymMat2(2.0, 0.5, 1.0)
    stream = NoiseStream(8)
    xs, ys = [], []
    from grazesim.noise import sample_xi_block
    xi = eps * sample_xi_block(NoiseSpec(eps, th), stream, n)
    out = xi + step_det(P0, (0.0, 0.0))
    c = np.cov(out.T, bias=True)
    t = eps**2 * th.as_array()
    se = np.sqrt((t * t + np.outer(np.diag(t), np.diag(t))) / n)
    assert np.all(np.abs(c - t) <= 3 * se)


def test_left_fixed_point():
    fp, ok = left_fixed_point(P0)
    assert np.array_equal(fp, [0.0, 0.0]) and ok
    fp, ok = left_fixed_point(P0.with_mu(-0.1))
    assert np.allclose(fp, [-0.1 / 0.55, -0.05 / 0.55]) and ok
    fp, ok = left_fixed_point(P0.with_mu(0.1))
    assert np.allclose(fp, [0.1 / 0.55, 0.05 / 0.55]) and not ok
    with pytest.raises(DegenerateDenominator):
        left_fixed_point(MapParams(1.5, 0.5, 1, 0.1))


def test_iterate_fixed_point_constant():
    p = P0.with_mu(-0.01)
    fp, _ = left_fixed_point(p)
    xs, ys = iterate(p, None, None, fp, 100)
    assert np.allclose(xs, fp[0], atol=1e-15) and np.allclose(ys, fp[1], atol=1e-15)
    xs, _ = iterate(p, None, None, (0.3, 0.1), 10, discard=500)
    assert np.allclose(xs, fp[0], atol=1e-12)


def test_iterate_converges_to_period_four(fig2):
    xs, ys = iterate(fig2, None, None, (0.0, 0.0), 8, discard=5000)
    sol = attracting_solutions(fig2)[0]
    assert sol.n == 4
    assert np.allclose(xs[:4], xs[4:], atol=1e-12)
    k = int(np.argmax(xs[:4]))
    assert np.allclose(np.roll(xs[:4], -k), sol.points[:, 0], atol=1e-10)


def test_periodic_points_return(fig2):
    for n in range(1, 6):
        for sol in maximal_solutions(fig2, n):
            if not sol.admissible:
                continue
            s = sol.points[0]
            for _ in range(n):
                s = step_det(fig2, s)
            assert np.allclose(s, sol.points[0], atol=1e-9)


def test_iterate_sink_and_discard_consistent():
    spec = NoiseSpec(1e-3, SymMat2.identity())
    p = P0.with_mu(0.004)
    xs, ys = iterate(p, spec, NoiseStream(1), (0.0, 0.0), 1000, discard=250, block=64)
    got = []
    final = iterate(p, spec, NoiseStream(1), (0.0, 0.0), 1000, discard=250,
                    sink=lambda a, b: got.append(np.column_stack([a, b])), block=100)
    got = np.concatenate(got)
    assert np.array_equal(got[:, 0], xs) and np.array_equal(got[:, 1], ys)
    assert np.array_equal(final, [xs[-1], ys[-1]])


def test_diverged():
    with pytest.raises(Diverged) as exc:
        iterate(MapParams(3.0, 0.05, 1, -0.1), None, None, (-1.0, 0.0), 1000)
    assert exc.value.index >= 0
    with pytest.raises(ValueError):
        iterate(P0, None, None, (0, 0), 0)
