"""Harmonically forced linear oscillator with a compliant, prestressed support.

    u'' = -k (u + 1) - b u' + F cos t + eps nu(t)                        u < 0
    u'' = -k (u + 1) - (b + b_s) u' - k_s (u + d) + F cos t + eps nu(t)  u > 0

The free oscillation grazes u = 0 at F = F_graz. This module simulates the
SDE, extracts Poincare-section data, and derives the stochastic Nordmark map
(tau, delta, chi, theta) together with the linear change to its coordinates.

Sections:

* Pi: local minima of u with u < -1.
* Pi': local maxima of u on the free side. When the mass enters contact
  the maximum is virtual: the deterministic free flow is continued from the
  upward crossing of u = 0 until u' = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import exitmap
from .errors import GrazingDegenerate, StepTooLarge, Diverged
from .noise import NoiseSpec, NoiseStream, split
from .nordmark import MapParams, iterate
from .smallmat import SymMat2, mat2_exp

TWO_PI = 2.0 * math.pi
DEFAULT_H = TWO_PI / 4096
CROSSING_TOL = 1e-10
_SDE_BLOCK = 1 << 16

# section kinds in the kernel output
PI, PI_PRIME, PI_PRIME_VIRTUAL = 0, 1, 2


@dataclass(frozen=True)
class OscillatorParams:
    k_osc: float
    b_osc: float
    k_supp: float
    b_supp: float
    d: float
    F: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        for name in ("k_osc", "b_osc", "k_supp", "b_supp", "d", "F", "eps"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        if not self.d > 0.0:
            raise ValueError("d must be positive (prestressed support)")
        if not self.b_osc**2 / 4.0 < self.k_osc:
            raise ValueError("need b_osc^2 / 4 < k_osc (underdamped oscillator)")
        if self.b_osc == 0.0 and self.k_osc == 1.0:
            raise ValueError("undamped resonance (k_osc = 1, b_osc = 0) has no periodic response")

    @property
    def alpha(self) -> float:
        return -0.5 * self.b_osc

    @property
    def beta(self) -> float:
        return math.sqrt(self.k_osc - self.b_osc**2 / 4.0)

    @property
    def J(self) -> np.ndarray:
        return np.array([[0.0, 1.0], [-self.k_osc, -self.b_osc]])

    def with_forcing(self, F: float) -> OscillatorParams:
        return OscillatorParams(self.k_osc, self.b_osc, self.k_supp, self.b_supp, self.d, F, self.eps)

    def with_eps(self, eps: float) -> OscillatorParams:
        return OscillatorParams(self.k_osc, self.b_osc, self.k_supp, self.b_supp, self.d, self.F, eps)


@dataclass(frozen=True)
class OscState:
    u: float
    udot: float
    t: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.u, self.udot, self.t)):
            raise ValueError("state must be finite")


def f_graz(p: OscillatorParams) -> float:
    return math.hypot(p.b_osc, 1.0 - p.k_osc)


def t_graz(p: OscillatorParams) -> float:
    """Phase of the grazing contact, in (0, pi)."""
    return math.atan2(p.b_osc, p.k_osc - 1.0)


def wrap_phase(t, t0: float = 0.0):
    """(t - t0) mod 2 pi, mapped to (-pi, pi]."""
    w = np.mod(np.asarray(t, dtype=float) - t0, TWO_PI)
    return np.where(w > math.pi, w - TWO_PI, w)


def _expm1_ratio(a: float, t: float) -> float:
    """(exp(a t) - 1) / a with the a -> 0 limit t."""
    return math.expm1(a * t) / a if a != 0.0 else t


def omega_closed_form(k: float, b: float, t: float = TWO_PI) -> tuple[float, float, float]:
    """(omega11, omega12, omega22) for velocity-only unit noise after time t."""
    alpha = -0.5 * b
    beta = math.sqrt(k - b * b / 4.0)
    e2 = math.exp(2.0 * alpha * t)
    g = _expm1_ratio(2.0 * alpha, t)  # (e2 - 1) / (2 alpha)
    c2, s2 = math.cos(2.0 * beta * t), math.sin(2.0 * beta * t)
    b2 = beta * beta
    w11 = g / (2.0 * b2) - alpha / (4.0 * k * b2) * (e2 * c2 - 1.0) - e2 * s2 / (4.0 * k * beta)
    w12 = -e2 * (c2 - 1.0) / (4.0 * b2)
    w22 = k * g / (2.0 * b2) - alpha / (4.0 * b2) * (e2 * c2 - 1.0) + e2 * s2 / (4.0 * beta)
    return w11, w12, w22


def linearized_flow(p: OscillatorParams, full: bool = False) -> exitmap.LinearizedFlow:
    """First-variation data along the grazing orbit over one forcing period.

    The default is the (u, u') system, whose Jacobian is constant. With
    ``full=True`` the phase coordinate is included, and the Jacobian then
    varies along the orbit through the forcing term.
    """
    if not full:
        J = p.J
        B = np.diag([0.0, 1.0])
        return exitmap.LinearizedFlow(lambda s: J, lambda s: B, TWO_PI, constant=True)
    fg, tg = f_graz(p), t_graz(p)
    B3 = np.diag([0.0, 1.0, 0.0])

    def jac(s):
        return np.array([[0.0, 1.0, 0.0],
                         [-p.k_osc, -p.b_osc, -fg * math.sin(s + tg)],
                         [0.0, 0.0, 0.0]])

    return exitmap.LinearizedFlow(jac, lambda s: B3, TWO_PI)


@dataclass(frozen=True)
class DerivedNormalForm:
    F_graz: float
    t_graz: float
    alpha: float
    beta: float
    A_hat: np.ndarray
    b_hat: np.ndarray
    c: float
    tau: float
    delta: float
    chi: int
    omega: SymMat2
    theta_g: SymMat2
    theta: SymMat2
    change: np.ndarray
    change_inv: np.ndarray = field(repr=False)

    @property
    def scale(self) -> float:
        """a12_hat^2 c^2, the common divisor of the coordinate change."""
        return self.A_hat[0, 1] ** 2 * self.c**2

    def mu(self, eta: float) -> float:
        return float(self.change[2, 2] * eta)

    def map_params(self, eta: float = 0.0) -> MapParams:
        return MapParams(self.tau, self.delta, self.chi, self.mu(eta))

    def as_dict(self) -> dict:
        return {
            "F_graz": self.F_graz, "t_graz": self.t_graz,
            "alpha": self.alpha, "beta": self.beta,
            "A_hat": self.A_hat.tolist(), "b_hat": self.b_hat.tolist(), "c": self.c,
            "tau": self.tau, "delta": self.delta, "chi": self.chi,
            "omega": list(self.omega.as_vec()), "theta_g": list(self.theta_g.as_vec()),
            "theta": list(self.theta.as_vec()),
            "change": self.change.tolist(), "change_inv": self.change_inv.tolist(),
        }


def derive_normal_form(p: OscillatorParams) -> DerivedNormalForm:
    """Nordmark-map parameters and coordinate change for the oscillator."""
    fg = f_graz(p)
    A_hat = mat2_exp(p.J, TWO_PI)
    (a11, a12), (a21, a22) = A_hat
    b_hat = np.array([1.0 - a11, -a21]) / fg
    kd = p.k_supp * p.d
    c = 2.0 * math.sqrt(2.0) * kd / (1.0 + kd)
    if c == 0.0 or abs(a12) < 1e-14:
        raise GrazingDegenerate("a12_hat or c vanishes; the grazing is not regular")
    alpha, beta = p.alpha, p.beta
    tau = 2.0 * math.exp(TWO_PI * alpha) * math.cos(TWO_PI * beta)
    delta = math.exp(2.0 * TWO_PI * alpha)
    chi = 1 if a12 * c > 0.0 else -1
    om = SymMat2(*omega_closed_form(p.k_osc, p.b_osc, TWO_PI))
    tg = exitmap.theta_g(om.as_array(), 1.0, 1.0)
    theta = exitmap.theta_from_theta_g(tg, a12, a22, c)
    s = a12 * a12 * c * c
    change = np.array([
        [1.0, 0.0, 0.0],
        [-a22, a12, b_hat[0]],
        [0.0, 0.0, (1.0 - a22) * b_hat[0] + a12 * b_hat[1]],
    ]) / s
    if abs(change[2, 2]) < 1e-300:
        raise GrazingDegenerate("the forcing amplitude does not unfold the grazing")
    return DerivedNormalForm(
        F_graz=fg, t_graz=t_graz(p), alpha=alpha, beta=beta, A_hat=A_hat, b_hat=b_hat,
        c=c, tau=tau, delta=delta, chi=chi, omega=om, theta_g=tg, theta=theta,
        change=change, change_inv=np.linalg.inv(change),
    )


def to_normal_form(nf: DerivedNormalForm, u1, w1, eta):
    """(u1, w1, eta) on Pi' -> (x, y, mu). Broadcasts over arrays."""
    v = np.stack(np.broadcast_arrays(np.asarray(u1, float), np.asarray(w1, float),
                                     np.asarray(eta, float)))
    x, y, mu = np.tensordot(nf.change, v, axes=1)
    return x, y, mu


def from_normal_form(nf: DerivedNormalForm, x, y, mu):
    """Inverse of :func:`to_normal_form`."""
    v = np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                     np.asarray(mu, float)))
    u1, w1, eta = np.tensordot(nf.change_inv, v, axes=1)
    return u1, w1, eta


# ---------------------------------------------------------------- free flow

@numba.njit(cache=True)
def _left_flow(k, b, F, u, v, t, dt):
    """Exact solution of the free (u < 0) equation without noise."""
    den = b * b + (1.0 - k) ** 2
    k1 = F * (k - 1.0) / den
    k2 = F * b / den
    c0, s0 = math.cos(t), math.sin(t)
    du = u + 1.0 - k1 * c0 - k2 * s0
    dv = v + k1 * s0 - k2 * c0
    alpha = -0.5 * b
    beta = math.sqrt(k - b * b / 4.0)
    e = math.exp(alpha * dt)
    cb, sb = math.cos(beta * dt), math.sin(beta * dt) / beta
    # exp(J dt) = e^{alpha dt} (cos(beta dt) I + sin(beta dt)/beta (J - alpha I))
    m11 = e * (cb + sb * 0.5 * b)
    m12 = e * sb
    m21 = -e * sb * k
    m22 = e * (cb - sb * 0.5 * b)
    t1 = t + dt
    c1, s1 = math.cos(t1), math.sin(t1)
    return (-1.0 + k1 * c1 + k2 * s1 + m11 * du + m12 * dv,
            -k1 * s1 + k2 * c1 + m21 * du + m22 * dv)


def left_flow_closed(p: OscillatorParams, state: OscState, dt: float) -> OscState:
    if dt == 0.0:
        return state
    u, v = _left_flow(p.k_osc, p.b_osc, p.F, state.u, state.udot, state.t, dt)
    return OscState(u, v, state.t + dt)


def periodic_state(p: OscillatorParams, t: float = 0.0) -> OscState:
    """The free period-2 pi response at time t (impacting or not)."""
    den = p.b_osc**2 + (1.0 - p.k_osc) ** 2
    k1, k2 = p.F * (p.k_osc - 1.0) / den, p.F * p.b_osc / den
    return OscState(-1.0 + k1 * math.cos(t) + k2 * math.sin(t),
                    -k1 * math.sin(t) + k2 * math.cos(t), t)


@numba.njit(cache=True)
def _virtual_max(k, b, F, v, t, scan):
    """Continue the free flow from (0, v > 0) at time t to its next u' = 0.

    Returns (time offset, u); the offset is -1 if none is found within 2 pi.
    """
    lo = 0.0
    hi = scan
    while hi <= 2.0 * math.pi + scan:
        uh, vh = _left_flow(k, b, F, 0.0, v, t, hi)
        if vh <= 0.0:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                um, vm = _left_flow(k, b, F, 0.0, v, t, mid)
                if vm > 0.0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-14:
                    break
            uh, vh = _left_flow(k, b, F, 0.0, v, t, hi)
            return hi, uh
        lo = hi
        hi += scan
    return -1.0, 0.0


# ----------------------------------------------------------------- SDE kernel

@numba.njit(cache=True, inline="always")
def _accel(k, b, ks, bs, d, F, u, v, t, contact):
    a = -k * (u + 1.0) - b * v + F * math.cos(t)
    if contact:
        a -= bs * v + ks * (u + d)
    return a


@numba.njit(cache=True)
def _sde_block(k, b, ks, bs, d, F, eps, h, u, v, contact, step0, t_start, z,
               t_record, stride, max_cross, sec, ev, path):
    """Advance len(z) Euler-Maruyama steps.

    Position uses the within-step quadratic u + v s + a s^2 / 2; velocity
    gets the drift and then the noise increment. Crossings of u = 0 split
    the step and are located by bisection on the quadratic.

    Returns (u, v, contact, n_sec, n_ev, n_path, status, bad_step) with
    status 0 ok, 1 too many crossings in one step, 2 non-finite state.
    """
    sq = eps * math.sqrt(h)
    n_sec = 0
    n_ev = 0
    n_path = 0
    scan = 2.0 * math.pi / 256.0
    for i in range(z.shape[0]):
        step = step0 + i
        t = t_start + step * h
        rec = t >= t_record
        u0, v0 = u, v
        a0 = _accel(k, b, ks, bs, d, F, u, v, t, contact)
        r = h
        s_t = t
        crossings = 0
        while True:
            a = _accel(k, b, ks, bs, d, F, u, v, s_t, contact)
            # g > 0 means the state has left its current side
            sgn = -1.0 if contact else 1.0
            g_end = sgn * (u + v * r + 0.5 * a * r * r)
            lo = 0.0
            hi = -1.0
            if a != 0.0:
                sv = -v / a
                if 0.0 < sv < r:
                    g_v = sgn * (u + v * sv + 0.5 * a * sv * sv)
                    if g_v > 0.0 and sgn * a < 0.0:
                        hi = sv
                    elif g_end > 0.0:
                        lo = sv if sgn * a > 0.0 else 0.0
                        hi = r
                elif g_end > 0.0:
                    hi = r
            elif g_end > 0.0:
                hi = r
            if hi < 0.0:
                u = u + v * r + 0.5 * a * r * r
                v = v + a * r
                break
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                gm = sgn * (u + v * mid + 0.5 * a * mid * mid)
                if gm > 0.0:
                    hi = mid
                else:
                    lo = mid
                if abs(gm) < 1e-10 or hi - lo < 1e-16:
                    break
            sc = hi
            v = v + a * sc
            u = 0.0
            s_t = s_t + sc
            r = r - sc
            crossings += 1
            if crossings > max_cross:
                return u, v, contact, n_sec, n_ev, n_path, 1, step
            entering = not contact
            contact = entering
            if rec:
                ev[n_ev, 0] = s_t
                ev[n_ev, 1] = 1.0 if entering else -1.0
                ev[n_ev, 2] = v
                n_ev += 1
                if entering and v > 0.0:
                    dt, um = _virtual_max(k, b, F, v, s_t, scan)
                    if dt >= 0.0:
                        sec[n_sec, 0] = PI_PRIME_VIRTUAL
                        sec[n_sec, 1] = s_t + dt
                        sec[n_sec, 2] = um
                        n_sec += 1
            if r <= 0.0:
                break
        v += sq * z[i]
        if not (math.isfinite(u) and math.isfinite(v) and abs(u) < 1e6 and abs(v) < 1e6):
            return u, v, contact, n_sec, n_ev, n_path, 2, step
        if rec and crossings == 0 and not contact:
            if v0 < 0.0 <= v or v0 > 0.0 >= v:
                sr = h * v0 / (v0 - v)
                ur = u0 + v0 * sr + 0.5 * a0 * sr * sr
                if v0 < 0.0:
                    if ur < -1.0:
                        sec[n_sec, 0] = PI
                        sec[n_sec, 1] = t + sr
                        sec[n_sec, 2] = ur
                        n_sec += 1
                elif ur > -1.0:
                    sec[n_sec, 0] = PI_PRIME
                    sec[n_sec, 1] = t + sr
                    sec[n_sec, 2] = ur
                    n_sec += 1
        if rec and stride > 0 and (step + 1) % stride == 0:
            path[n_path, 0] = t + h
            path[n_path, 1] = u
            path[n_path, 2] = v
            n_path += 1
    return u, v, contact, n_sec, n_ev, n_path, 0, step0 + z.shape[0] - 1


@dataclass
class SDEResult:
    """Output of :func:`simulate_sde`.

    ``sections`` rows are (kind, t, u) with kind one of PI, PI_PRIME,
    PI_PRIME_VIRTUAL; ``events`` rows are (t, direction, udot) for u = 0
    crossings (+1 entering contact); ``path`` rows are (t, u, udot).
    """

    params: OscillatorParams
    final: OscState
    sections: np.ndarray
    events: np.ndarray
    path: np.ndarray
    steps: int
    h: float


def simulate_sde(p: OscillatorParams, stream: NoiseStream | None, s0: OscState, t_end: float,
                 h: float = DEFAULT_H, t_record: float | None = None, stride: int = 0,
                 max_crossings: int = 1) -> SDEResult:
    """Euler-Maruyama integration from ``s0`` up to ``t_end``.

    Section points and events are kept from ``t_record`` on (default: the
    start); ``stride > 0`` additionally stores every stride-th state.
    Raises :class:`StepTooLarge` when one step crosses u = 0 more than
    ``max_crossings`` times.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    if stride < 0 or max_crossings < 1:
        raise ValueError("need stride >= 0 and max_crossings >= 1")
    if p.eps > 0.0 and stream is None:
        raise ValueError("a noise stream is required when eps > 0")
    nsteps = int(math.ceil((t_end - s0.t) / h - 1e-9))
    if nsteps < 1:
        raise ValueError("t_end must exceed the start time")
    t_record = s0.t if t_record is None else t_record
    u, v = s0.u, s0.udot
    contact = u > 0.0
    secs, evs, paths = [], [], []
    done = 0
    while done < nsteps:
        m = min(_SDE_BLOCK, nsteps - done)
        z = stream.standard_normal(m) if p.eps > 0.0 else np.zeros(m)
        sec = np.empty(((1 + max_crossings) * m + 8, 3))
        ev = np.empty((2 * max_crossings * m + 8, 3))
        path = np.empty((m // stride + 2 if stride else 1, 3))
        u, v, contact, ns, ne, npth, status, bad = _sde_block(
            p.k_osc, p.b_osc, p.k_supp, p.b_supp, p.d, p.F, p.eps, h, u, v, contact,
            done, s0.t, z, t_record, stride, max_crossings, sec, ev, path)
        if status == 1:
            raise StepTooLarge(f"step {bad} crosses u = 0 more than {max_crossings} time(s); reduce h")
        if status == 2:
            raise Diverged(bad, (u, v))
        secs.append(sec[:ns].copy())
        evs.append(ev[:ne].copy())
        paths.append(path[:npth].copy())
        done += m
    final = OscState(u, v, s0.t + nsteps * h)
    return SDEResult(p, final, np.concatenate(secs), np.concatenate(evs),
                     np.concatenate(paths), nsteps, h)


def section_pi(result: SDEResult) -> np.ndarray:
    """u at the Pi section (local minima below u = -1)."""
    s = result.sections
    return s[s[:, 0] == PI, 2]


def section_pi_prime(result: SDEResult, virtual: bool | None = None):
    """(u1, w1, is_virtual) at Pi', with w1 the phase relative to t_graz in (-pi, pi].

    ``virtual`` selects only virtual (True) or only real (False) points.
    """
    s = result.sections
    mask = s[:, 0] != PI
    if virtual is not None:
        mask &= (s[:, 0] == PI_PRIME_VIRTUAL) if virtual else (s[:, 0] == PI_PRIME)
    rows = s[mask]
    w = wrap_phase(rows[:, 1], t_graz(result.params))
    return rows[:, 2], w, rows[:, 0] == PI_PRIME_VIRTUAL


# ------------------------------------------------------------ sweeps, compare

def section_sweep(p: OscillatorParams, forcings, stream: NoiseStream, periods: int,
                  transient: int = 100, h: float = DEFAULT_H, max_crossings: int = 1):
    """Pi and Pi' data over a grid of forcing amplitudes (one child stream each).

    Returns (pi_rows, prime_rows): arrays with columns (F, u0) and
    (F, u1, w1, virtual).
    """
    forcings = np.asarray(forcings, dtype=float)
    children = split(stream, len(forcings))
    pi_rows, pp_rows = [], []
    for F, child in zip(forcings, children):
        q = p.with_forcing(float(F))
        res = simulate_sde(q, child, periodic_state(q), TWO_PI * (transient + periods), h,
                           t_record=TWO_PI * transient, max_crossings=max_crossings)
        u0 = section_pi(res)
        pi_rows.append(np.column_stack([np.full(len(u0), F), u0]))
        u1, w1, virt = section_pi_prime(res)
        pp_rows.append(np.column_stack([np.full(len(u1), F), u1, w1, virt.astype(float)]))
    return np.concatenate(pi_rows), np.concatenate(pp_rows)


@dataclass(frozen=True)
class CompareRow:
    F: float
    eta: float
    sde_count: int
    sde_mean: float
    sde_std: float
    map_count: int
    map_mean: float
    map_std: float

    def rel_gap(self) -> tuple[float, float]:
        return (abs(self.sde_mean - self.map_mean) / abs(self.map_mean),
                abs(self.sde_std - self.map_std) / self.map_std)


@dataclass
class CompareResult:
    rows: list[CompareRow]
    sde_points: dict[float, np.ndarray]  # F -> (u1, w1)
    map_points: dict[float, np.ndarray]


def compare(p: OscillatorParams, etas, stream: NoiseStream, periods: int = 3000,
            transient: int = 100, h: float = DEFAULT_H, map_discard: int = 1000,
            max_crossings: int = 1) -> CompareResult:
    """Pi' statistics from the SDE and from the derived stochastic map.

    Map iterates are carried back to (u1, w1) through the inverse coordinate
    change; the map runs for as many iterates as the SDE run has periods.
    Only u1 is comparable. The global map is built from the stroboscopic
    monodromy exp(2 pi J), so its second coordinate is velocity-like rather
    than the phase w1 recorded by the SDE.
    """
    nf = derive_normal_form(p)
    etas = [float(e) for e in etas]
    children = split(stream, 2 * len(etas))
    rows, sde_pts, map_pts = [], {}, {}
    for i, eta in enumerate(etas):
        F = nf.F_graz + eta
        q = p.with_forcing(F)
        res = simulate_sde(q, children[2 * i], periodic_state(q), TWO_PI * (transient + periods), h,
                           t_record=TWO_PI * transient, max_crossings=max_crossings)
        u1, w1, _ = section_pi_prime(res)
        mp = nf.map_params(eta)
        xs, ys = iterate(mp, NoiseSpec(p.eps, nf.theta), children[2 * i + 1], (0.0, 0.0),
                         periods, discard=map_discard)
        mu1, mw1, _ = from_normal_form(nf, xs, ys, mp.mu)
        sde_pts[F] = np.column_stack([u1, w1])
        map_pts[F] = np.column_stack([mu1, mw1])
        rows.append(CompareRow(F, eta, len(u1), float(np.mean(u1)), float(np.std(u1)),
                               len(mu1), float(np.mean(mu1)), float(np.std(mu1))))
    return CompareResult(rows, sde_pts, map_pts)
