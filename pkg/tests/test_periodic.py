import math

import numpy as np
import pytest

from grazesim.errors import DegenerateDenominator, ZeroXStar
from grazesim.nordmark import MapParams, step_det
from grazesim.periodic import (admissibility, attracting_solutions, branch_sweep, kink_jacobian,
                               maximal_solutions, nth_power_data, period_windows, solve_for_mu,
                               solve_for_x, stability)

P = MapParams(0.5, 0.05, 1)


def random_params(rng):
    while True:
        tau, delta = rng.uniform(-1.2, 1.2), rng.uniform(-0.9, 0.9)
        p = MapParams(tau, delta, int(rng.choice([-1, 1])), rng.uniform(-0.05, 0.05))
        if p.grazing_orbit_attracting:
            return p


def test_nth_power_data():
    An, b = nth_power_data(P, 1)
    assert np.array_equal(An, P.A) and np.array_equal(b, [0.0, 1.0])
    An, b = nth_power_data(P, 2)
    assert np.allclose(An, [[0.2, 0.5], [-0.025, -0.05]])
    # (I + A)(0, 1)^T
    assert np.allclose(b, [1.0, 1.0])
    for n in range(1, 8):
        _, bn = nth_power_data(P, n)
        _, bn1 = nth_power_data(P, n + 1)
        assert np.allclose(bn1, P.A @ bn + [0.0, 1.0], atol=1e-15)


def test_solve_for_mu_examples():
    assert solve_for_mu(P, 3, 0.0) == (0.0, 0.0)
    mu, y = solve_for_mu(P, 1, 0.01)
    assert mu == pytest.approx(0.1055, rel=1e-12)
    assert y == pytest.approx(0.105, rel=1e-12)
    # fixed point of the right branch
    assert np.allclose(step_det(P.with_mu(mu), (0.01, y)), (0.01, y), atol=1e-15)


def test_formula_uses_a12():
    # n = 2 has a12 = 0.5 and a22 = -0.05, so a bare "a2" reading would differ
    x = 0.003
    mu, y = solve_for_mu(P, 2, x)
    s = np.array([x, y])
    p = P.with_mu(mu)
    s1 = step_det(p, s)
    assert s1[0] <= 0
    assert np.allclose(step_det(p, s1), s, atol=1e-14)


def test_degenerate_denominator():
    # A^2 = I here, so a12 = 0 and a22 = 1
    p = MapParams(0.0, -1.0, 1)
    with pytest.raises(DegenerateDenominator):
        solve_for_mu(p, 2, 0.01)


def test_solve_for_x_examples():
    assert 0.0 in solve_for_x(P.with_mu(0.0), 3)
    xs = solve_for_x(P.with_mu(0.1055), 1)
    assert any(abs(x - 0.01) < 1e-12 for x in xs)


def test_round_trip_mu(rng):
    count = 0
    while count < 1000:
        p = random_params(rng)
        n = int(rng.integers(1, 7))
        for x in solve_for_x(p, n):
            mu, _ = solve_for_mu(p, n, x)
            assert abs(mu - p.mu) <= 1e-10
            count += 1


def test_stability_example():
    st = stability(P, 1, 0.01)
    assert np.allclose(st.K, [[-4.5, 1.0], [-0.05, 0.0]])
    assert st.multipliers[0].real == pytest.approx(-4.48886, abs=1e-5)
    assert st.multipliers[1].real == pytest.approx(-0.01114, abs=1e-5)
    assert not st.stable
    with pytest.raises(ZeroXStar):
        stability(P, 1, 0.0)


def test_multiplier_product_and_det(rng):
    for _ in range(1000):
        p = random_params(rng)
        n = int(rng.integers(1, 8))
        x = rng.uniform(1e-6, 1.0)
        st = stability(p, n, x)
        dn = p.delta**n
        K = st.K
        # rounding in a 2x2 determinant scales with the products of entries
        scale = abs(K[0, 0] * K[1, 1]) + abs(K[0, 1] * K[1, 0])
        prod = st.multipliers[0] * st.multipliers[1]
        assert abs(prod - dn) <= 1e-12 * scale + 1e-300
        assert abs(np.linalg.det(K) - dn) <= 1e-12 * scale + 1e-300


def test_large_x_limit():
    An, _ = nth_power_data(P, 3)
    st = stability(P, 3, 1e16)
    assert np.allclose(st.K, An, atol=1e-8)


def test_kink_jacobian():
    assert np.allclose(kink_jacobian(1, 0.25), [[1, 0], [-1.0, 1]])


def test_solutions_close(rng):
    for _ in range(300):
        p = random_params(rng)
        n = int(rng.integers(1, 6))
        for sol in maximal_solutions(p, n):
            # closure along the branches the solution assumes (virtual ones included)
            pts = sol.points
            z = pts[-1]
            back = p.A @ z + (0.0, p.mu) if n > 1 else p.A @ (z - (0.0, p.chi * math.sqrt(z[0]))) + (0.0, p.mu)
            assert np.allclose(back, pts[0], atol=1e-9)
            if sol.admissible:
                assert pts[0, 0] >= 0 and np.all(pts[1:, 0] <= 0)
                assert np.count_nonzero(pts[:, 0] > 0) <= 1


def test_fig2_period_four(fig2):
    sols = attracting_solutions(fig2, 5)
    assert [s.n for s in sols] == [4]
    assert admissibility(fig2, 4, sols[0])
    assert not any(s.stable and s.admissible for s in maximal_solutions(fig2, 3))


def test_n1_always_admissible(rng):
    for _ in range(100):
        p = random_params(rng)
        for sol in maximal_solutions(p, 1):
            assert sol.admissible


def test_disjoint_windows():
    mus = np.linspace(0.001, 0.03, 300)
    for mu in mus:
        assert len(attracting_solutions(P.with_mu(mu), 5)) <= 1
    wins = period_windows(P, mus, 5)
    assert set(wins) == {3, 4, 5}
    assert wins[5][1] < wins[4][0] and wins[4][1] < wins[3][0]


def test_branch_sweep_negative_mu_and_empty():
    assert branch_sweep(P, np.linspace(-0.05, -0.001, 30)) == []
    assert branch_sweep(P, []) == []
    rows = branch_sweep(P, [0.005, 0.02])
    assert [(mu, s.n) for mu, s in rows] == [(0.005, 4), (0.02, 3)]
