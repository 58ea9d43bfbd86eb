"""Small-noise exit statistics for a deterministic orbit.

For dv = f(v) dt + eps B(v) dW, the first-order fluctuation about the
deterministic orbit v0(t) is Gaussian with covariance

    Omega(t) = int_0^t H(s, t) H(s, t)^T ds,
    H(s, t)  = Phi(t, s) B(v0(s)),

where Phi is the propagator of the linearised flow. Projecting Omega along
the drift onto the exit section gives the exit-point covariance, from which
the noise covariance of the global return map follows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import DegenerateNormalForm, QuadratureNotConverged, Tangential
from .smallmat import SymMat2

DEFAULT_PANELS = 1024
CONVERGENCE_RTOL = 1e-6

_GAUSS_OFFSET = math.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class LinearizedFlow:
    """Jacobian and diffusion matrix along a deterministic orbit on [0, horizon].

    Set ``constant=True`` when the Jacobian does not depend on time; the
    propagator then needs a single matrix exponential per mesh size.
    """

    jacobian: Callable[[float], np.ndarray]
    diffusion: Callable[[float], np.ndarray]
    horizon: float
    constant: bool = False

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class OmegaResult:
    omega: np.ndarray
    error_estimate: float
    panels: int


def _step_propagator(flow: LinearizedFlow, s: float, h: float) -> np.ndarray:
    """Propagator over [s, s + h], fourth-order Magnus (two Gauss points)."""
    if flow.constant:
        return expm(np.asarray(flow.jacobian(s), dtype=float) * h)
    j1 = np.asarray(flow.jacobian(s + (0.5 - _GAUSS_OFFSET) * h), dtype=float)
    j2 = np.asarray(flow.jacobian(s + (0.5 + _GAUSS_OFFSET) * h), dtype=float)
    mag = 0.5 * h * (j1 + j2) + (math.sqrt(3.0) / 12.0) * h * h * (j2 @ j1 - j1 @ j2)
    return expm(mag)


def _simpson(flow: LinearizedFlow, t0: float, t1: float, panels: int) -> np.ndarray:
    n = 2 * panels
    h = (t1 - t0) / n
    s = t0 + h * np.arange(n + 1)
    dim = np.asarray(flow.jacobian(t0)).shape[0]
    phi = np.eye(dim)
    step = _step_propagator(flow, t0, h) if flow.constant else None
    total = np.zeros((dim, dim))
    # march backwards: Phi(t1, s_k) = Phi(t1, s_{k+1}) Phi(s_{k+1}, s_k)
    for k in range(n, -1, -1):
        if k < n:
            phi = phi @ (step if flow.constant else _step_propagator(flow, s[k], h))
        hk = phi @ np.asarray(flow.diffusion(s[k]), dtype=float)
        w = 1.0 if k in (0, n) else (4.0 if k % 2 else 2.0)
        total += w * (hk @ hk.T)
    out = total * h / 3.0
    return 0.5 * (out + out.T)


def omega_quadrature(flow: LinearizedFlow, panels: int = DEFAULT_PANELS,
                     t0: float = 0.0, t1: float | None = None) -> OmegaResult:
    """Covariance of the first-variation process over [t0, t1] (default [0, horizon]).

    Composite Simpson with ``panels`` panels, repeated with twice as many;
    the refined value is returned with the Richardson error estimate.
    """
    if panels < 16:
        raise ValueError("panels must be >= 16")
    t1 = flow.horizon if t1 is None else t1
    coarse = _simpson(flow, t0, t1, panels)
    fine = _simpson(flow, t0, t1, 2 * panels)
    scale = np.linalg.norm(fine)
    diff = np.linalg.norm(fine - coarse)
    if scale > 0.0 and diff > CONVERGENCE_RTOL * scale:
        raise QuadratureNotConverged(f"relative change {diff / scale:.2e} on doubling")
    return OmegaResult(fine, diff / 15.0, 2 * panels)


def propagator(flow: LinearizedFlow, t0: float, t1: float, steps: int = 2048) -> np.ndarray:
    """Phi(t1, t0) as a time-ordered product of step exponentials."""
    h = (t1 - t0) / steps
    dim = np.asarray(flow.jacobian(t0)).shape[0]
    phi = np.eye(dim)
    for k in range(steps):
        phi = _step_propagator(flow, t0 + k * h, h) @ phi
    return phi


def exit_projector(p, q) -> np.ndarray:
    """I - q p^T / (p^T q); refuses nearly tangential exits."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pq = float(p @ q)
    if abs(pq) <= 1e-12 * np.linalg.norm(p) * np.linalg.norm(q):
        raise Tangential("drift is tangent to the exit boundary")
    return np.eye(len(p)) - np.outer(q, p) / pq


def exit_covariance(omega, p, q) -> np.ndarray:
    """Leading-order covariance of the first-exit location."""
    P = exit_projector(p, q)
    out = P @ np.asarray(omega, dtype=float) @ P.T
    return 0.5 * (out + out.T)


def theta_g(omega, zeta_l: float, gamma_l: float) -> SymMat2:
    """Global-map noise covariance in (u, w) from Omega in (u, v, w) coordinates.

    A 2x2 ``omega`` is read as the (u, v) block with every w entry zero.
    """
    om = np.asarray(omega, dtype=float)
    if om.shape == (2, 2):
        om = np.pad(om, ((0, 1), (0, 1)))
    r = zeta_l / gamma_l
    return SymMat2(
        om[0, 0],
        r * om[0, 1] + om[0, 2],
        r * r * om[1, 1] + 2.0 * r * om[1, 2] + om[2, 2],
    )


def theta_from_theta_g(tg: SymMat2, a12_hat: float, a22_hat: float, c: float) -> SymMat2:
    """Noise covariance in normal-form coordinates (congruence by the coordinate change)."""
    if abs(a12_hat * c) < 1e-14:
        raise DegenerateNormalForm("a12_hat * c vanishes; the normal form is undefined")
    m = np.array([[1.0, 0.0], [-a22_hat, a12_hat]])
    return tg.congruence(m).scaled(1.0 / (a12_hat**4 * c**4))
