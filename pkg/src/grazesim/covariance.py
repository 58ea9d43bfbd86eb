"""Gaussian covariance machinery for the linearised stochastic map.

Covariances here are for the unscaled noise; the physical covariance of the
invariant density about a periodic point is ``eps**2`` times these.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChainInconsistent, DegenerateDenominator, OnUnitCircle, SingularMatrix, Unstable
from .nordmark import MapParams
from .periodic import PeriodicSolution, kink_jacobian, nth_power_data, stability
from .smallmat import SymMat2, det2, det3, solve3, trace2

UNIT_CIRCLE_GUARD = 1e-12
CHAIN_RTOL = 1e-8


def theta_n(A, theta: SymMat2, n: int) -> SymMat2:
    """Covariance of the accumulated noise over n steps: sum_i A^i theta (A^T)^i."""
    if n < 1:
        raise ValueError("n must be >= 1")
    A = np.asarray(A, dtype=float)
    term = theta.as_array()
    total = term.copy()
    for _ in range(n - 1):
        term = A @ term @ A.T
        total += term
    return SymMat2.from_array(total)


def m_matrix(K) -> np.ndarray:
    """3x3 matrix acting on (l11, l12, l22) that represents L -> K L K^T."""
    (k11, k12), (k21, k22) = np.asarray(K, dtype=float)
    return np.array([
        [k11 * k11, 2.0 * k11 * k12, k12 * k12],
        [k11 * k21, k11 * k22 + k12 * k21, k12 * k22],
        [k21 * k21, 2.0 * k21 * k22, k22 * k22],
    ])


def det_guard_identity(K) -> float:
    """det(I - M) in factored form: (det - tr + 1)(det + tr + 1)(1 - det)."""
    d, t = det2(K), trace2(K)
    return (d - t + 1.0) * (d + t + 1.0) * (1.0 - d)


def solve_lyapunov(K, theta_n: SymMat2) -> tuple[SymMat2, float]:
    """Solve L = K L K^T + theta_n through the 3x3 reduced system.

    ``theta_n`` is the n-step covariance, not the one-step theta. Returns
    the solution and det(I - M).
    """
    IM = np.eye(3) - m_matrix(K)
    guard = det3(IM)
    if abs(guard) < UNIT_CIRCLE_GUARD:
        raise OnUnitCircle(f"det(I - M) = {guard:.3e}: K has an eigenvalue on the unit circle")
    try:
        lam = solve3(IM, theta_n.as_vec())
    except SingularMatrix as exc:
        raise OnUnitCircle(str(exc)) from exc
    return SymMat2(*map(float, lam)), guard


def lambda_chain(A, theta: SymMat2, lambda0: SymMat2, n: int,
                 first_jacobian=None, check_closure: bool | None = None) -> list[SymMat2]:
    """Covariances about each point of a period-n solution, starting at index 0.

    Each step is L -> J L J^T + theta. The step out of the right-half-plane
    point (index 0 -> 1) has Jacobian ``A @ first_jacobian`` when the kink
    Jacobian is given; all later steps use A. With the kink supplied the
    chain must close (step n returns to ``lambda0``), otherwise
    :class:`ChainInconsistent` is raised.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    A = np.asarray(A, dtype=float)
    if check_closure is None:
        check_closure = first_jacobian is not None
    th = theta.as_array()
    J0 = A if first_jacobian is None else A @ np.asarray(first_jacobian, dtype=float)
    chain = [lambda0]
    cur = J0 @ lambda0.as_array() @ J0.T + th
    for _ in range(1, n):
        chain.append(SymMat2.from_array(cur))
        cur = A @ cur @ A.T + th
    if check_closure:
        gap = SymMat2.from_array(cur) - lambda0
        if gap.norm() > CHAIN_RTOL * max(lambda0.norm(), 1e-300):
            raise ChainInconsistent(f"chain does not close: |gap| = {gap.norm():.3e}")
    return chain


def lambda_approx(An, x_star: float, theta_n: SymMat2) -> SymMat2:
    """Near-grazing approximation of the Lyapunov solution.

    theta_n + theta_n[0,0] / (4 x* - a12^2) * [[a12^2, a12 a22], [a12 a22, a22^2]]
    """
    a12, a22 = float(An[0][1]), float(An[1][1])
    den = 4.0 * x_star - a12 * a12
    if abs(den) < 1e-14:
        raise DegenerateDenominator("4 x* - a12^2 vanishes")
    f = theta_n.s11 / den
    return theta_n + SymMat2(f * a12 * a12, f * a12 * a22, f * a22 * a22)


def _stability_factor(tau: float, delta: float) -> float:
    return (delta - tau + 1.0) * (delta + tau + 1.0) * (1.0 - delta)


def theta_inf(tau: float, delta: float, theta: SymMat2) -> SymMat2:
    """Closed-form sum_{i>=0} A^i theta (A^T)^i for A = [[tau, 1], [-delta, 0]]."""
    big_delta = _stability_factor(tau, delta)
    if big_delta <= 0.0 or abs(delta) >= 1.0:
        raise Unstable(f"A is not a contraction: tau={tau}, delta={delta}")
    t11, t12, t22 = theta.s11, theta.s12, theta.s22
    r11 = (1.0 + delta) * t11 + 2.0 * tau * t12 + (1.0 + delta) * t22
    r12 = -tau * delta * t11 + (1.0 - tau**2 - delta**2) * t12 - tau * delta * t22
    r22 = ((delta**2 + delta**3) * t11 + 2.0 * tau * delta**2 * t12
           + (1.0 + delta - tau**2 + tau**2 * delta) * t22)
    return SymMat2(r11 / big_delta, r12 / big_delta, r22 / big_delta)


def theta_inf_trace2(tau: float, delta: float, theta12: float, theta22: float) -> SymMat2:
    """theta_inf for a noise covariance normalised to trace 2 (theta11 = 2 - theta22)."""
    big_delta = _stability_factor(tau, delta)
    if big_delta <= 0.0 or abs(delta) >= 1.0:
        raise Unstable(f"A is not a contraction: tau={tau}, delta={delta}")
    g = 1.0 + delta + tau * theta12
    return SymMat2(
        2.0 * g / big_delta,
        (-2.0 * tau * delta + (1.0 - tau**2 - delta**2) * theta12) / big_delta,
        2.0 * delta**2 * g / big_delta + theta22,
    )


@dataclass(frozen=True)
class CovarianceChain:
    n: int
    theta_n: SymMat2
    lam: list[SymMat2]
    det_guard: float
    K: np.ndarray

    def scaled(self, eps: float) -> list[SymMat2]:
        return [L.scaled(eps * eps) for L in self.lam]


def covariance_chain(p: MapParams, theta: SymMat2, sol: PeriodicSolution) -> CovarianceChain:
    """Gaussian-approximation covariances about every point of ``sol``."""
    n = sol.n
    A = p.A
    thn = theta_n(A, theta, n)
    st = stability(p, n, sol.x_star)
    lam0, guard = solve_lyapunov(st.K, thn)
    chain = lambda_chain(A, theta, lam0, n, first_jacobian=kink_jacobian(p.chi, sol.x_star))
    return CovarianceChain(n=n, theta_n=thn, lam=chain, det_guard=guard, K=st.K)


def fixed_point_covariance(p: MapParams, theta: SymMat2) -> SymMat2:
    """Stationary covariance about the left fixed point (linear regime)."""
    return theta_inf(p.tau, p.delta, theta)


def approximation_error(p: MapParams, theta: SymMat2, sol: PeriodicSolution) -> float:
    """Relative Frobenius gap between the near-grazing approximation and the exact solve."""
    An, _ = nth_power_data(p, sol.n)
    thn = theta_n(p.A, theta, sol.n)
    exact, _ = solve_lyapunov(stability(p, sol.n, sol.x_star).K, thn)
    approx = lambda_approx(An, sol.x_star, thn)
    return (approx - exact).norm() / exact.norm()
