import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from grazesim.errors import NotPSD, SingularMatrix
from grazesim.smallmat import (SymMat2, chol2, det2, det3, eig2, inv2, mat2, mat2_exp,
                               mat2_pow, solve3, spectral_radius2, trace2)

from conftest import random_psd

finite = st.floats(-5, 5, allow_nan=False)


def test_mat2_rejects_nonfinite():
    with pytest.raises(ValueError):
        mat2(1.0, math.nan, 0.0, 1.0)


def test_exp_of_zero_is_identity():
    assert np.array_equal(mat2_exp(np.zeros((2, 2)), 1.0), np.eye(2))


def test_exp_diagonal():
    out = mat2_exp(np.diag([0.3, -1.2]), 2.0)
    assert np.allclose(out, np.diag([math.exp(0.6), math.exp(-2.4)]), rtol=1e-14)


def test_exp_oscillator_jacobian():
    J = np.array([[0.0, 1.0], [-5.0, -0.5]])
    E = mat2_exp(J, 2 * math.pi)
    beta = math.sqrt(4.9375)
    assert trace2(E) == pytest.approx(2 * math.exp(-math.pi / 2) * math.cos(2 * math.pi * beta), rel=1e-12)
    assert det2(E) == pytest.approx(math.exp(-math.pi), rel=1e-12)
    # independent oracle: scaling and squaring of a Taylor series
    m = J * 2 * math.pi / 2**12
    s, term = np.eye(2), np.eye(2)
    for k in range(1, 12):
        term = term @ m / k
        s = s + term
    for _ in range(12):
        s = s @ s
    assert np.allclose(E, s, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("m", [
    [[1.0, 1.0], [0.0, 1.0]],           # repeated, defective
    [[2.0, 0.0], [0.0, 2.0]],           # repeated, scalar
    [[-1.0, 1e-13], [0.0, -1.0]],       # inside the repeated-root band
    [[0.0, 1.0], [-1.0, -2.0 + 1e-9]],  # near critical damping
    [[0.0, 1.0], [4.0, 0.0]],           # real distinct
    [[0.0, 1.0], [-4.0, 0.0]],          # pure rotation
])
def test_exp_branches_match_scipy(m):
    m = np.array(m)
    for t in (0.1, 1.0, 3.0):
        assert np.allclose(mat2_exp(m, t), expm(m * t), rtol=1e-11, atol=1e-13)


def test_exp_random_matches_scipy(rng):
    for _ in range(1000):
        m = rng.normal(size=(2, 2)) * rng.uniform(0.1, 3)
        t = rng.uniform(-2, 2)
        ref = expm(m * t)
        assert np.allclose(mat2_exp(m, t), ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())


def test_exp_semigroup(rng):
    for _ in range(1000):
        m = rng.normal(size=(2, 2)) * 0.3
        s, t = rng.uniform(-10, 10, 2)
        lhs = mat2_exp(m, s + t)
        rhs = mat2_exp(m, s) @ mat2_exp(m, t)
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())


def test_eig2_examples():
    assert eig2(np.eye(2)) == (1, 1)
    l1, l2 = eig2(np.array([[-4.5, 1.0], [-0.05, 0.0]]))
    assert l1.real == pytest.approx(-4.48886, abs=1e-5)
    assert l2.real == pytest.approx(-0.01114, abs=1e-5)
    assert l1 * l2 == pytest.approx(0.05, rel=1e-12)
    assert l1 + l2 == pytest.approx(-4.5, rel=1e-12)
    assert eig2(np.array([[0.0, 1.0], [-1.0, 0.0]])) == (1j, -1j)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, finite)
def test_eig2_vieta(a, b, c, d):
    m = np.array([[a, b], [c, d]])
    l1, l2 = eig2(m)
    scale = max(1.0, np.abs(m).max() ** 2)
    assert abs(l1 + l2 - (a + d)) <= 1e-12 * scale
    assert abs(l1 * l2 - det2(m)) <= 1e-12 * scale
    assert abs(l1) >= abs(l2)


def test_spectral_radius(rng):
    for _ in range(100):
        m = rng.normal(size=(2, 2))
        assert spectral_radius2(m) == pytest.approx(max(abs(np.linalg.eigvals(m))), rel=1e-12)


def test_inv2(rng):
    for _ in range(100):
        m = rng.normal(size=(2, 2))
        assert np.allclose(inv2(m) @ m, np.eye(2), atol=1e-9 * np.linalg.cond(m))
    with pytest.raises(SingularMatrix):
        inv2(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_det_of_power(rng):
    # well-conditioned draws: |det m| is not tiny next to the entries,
    # otherwise the 2x2 determinant itself cancels catastrophically
    done = 0
    while done < 1000:
        m = rng.normal(size=(2, 2))
        m *= rng.uniform(0.3, 1.0) / np.linalg.norm(m)
        if abs(det2(m)) < 0.1 * np.linalg.norm(m) ** 2:
            continue
        done += 1
        n = int(rng.integers(0, 12))
        d = det2(m) ** n
        assert abs(det2(mat2_pow(m, n)) - d) <= 1e-10 * max(abs(d), 1e-300) + 1e-14


def test_solve3_examples(rng):
    v = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(solve3(np.eye(3), v), v)
    assert np.allclose(solve3(np.diag([2.0, 4.0, 5.0]), [2.0, 4.0, 5.0]), [1.0, 1.0, 1.0])
    for _ in range(1000):
        m = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        v = rng.normal(size=3)
        assert np.allclose(m @ solve3(m, v), v, atol=1e-12)
    with pytest.raises(SingularMatrix):
        solve3(np.array([[1.0, 2, 3], [2, 4, 6], [0, 0, 1]]), v)


def test_det3(rng):
    for _ in range(200):
        m = rng.normal(size=(3, 3))
        assert det3(m) == pytest.approx(np.linalg.det(m), rel=1e-10, abs=1e-12)


def test_chol2_examples():
    assert np.array_equal(chol2(SymMat2.identity()), np.eye(2))
    assert np.allclose(chol2(SymMat2(4.0, 2.0, 2.0)), [[2.0, 0.0], [1.0, 1.0]])
    assert np.array_equal(chol2(SymMat2(0.0, 0.0, 1.0)), [[0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NotPSD):
        chol2(SymMat2(-1.0, 0.0, 1.0))
    with pytest.raises(NotPSD):
        chol2(SymMat2(1.0, 2.0, 1.0))


def test_chol2_reconstructs(rng):
    for _ in range(1000):
        s = random_psd(rng)
        L = chol2(s)
        assert L[0, 1] == 0.0
        assert np.allclose(L @ L.T, s.as_array(), atol=1e-12 * max(1.0, s.norm()))


def test_symmat_algebra(rng):
    s = SymMat2(1.0, 0.5, 2.0)
    assert s.det == pytest.approx(1.75)
    assert s.trace == 3.0
    assert (s + s - s) == s
    assert s.scaled(2.0) == SymMat2(2.0, 1.0, 4.0)
    assert SymMat2.from_array(s.as_array()) == s
    for _ in range(1000):
        p = random_psd(rng)
        m = rng.normal(size=(2, 2))
        assert p.congruence(m).is_psd()
    assert not SymMat2(1.0, 2.0, 1.0).is_psd()
    # tolerance is relative to the entries
    big = SymMat2(700.0, 700.0 * (1 - 1e-15), 700.0)
    assert big.is_psd()
