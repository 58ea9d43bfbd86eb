"""Closed-form linear algebra for 2x2 and 3x3 real matrices.

Matrices are plain ``numpy`` arrays of shape (2, 2) or (3, 3); symmetric 2x2
matrices get their own small value type, :class:`SymMat2`, because covariance
matrices are passed around everywhere and three numbers are easier to
validate, serialise and compare than a full array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPSD, SingularMatrix

PSD_RTOL = 1e-12
# |trace^2 - 4 det| below this (relative) selects the repeated-root branch.
REPEATED_ROOT_WIDTH = 1e-12


def mat2(m11, m12, m21, m22):
    """Build a 2x2 matrix from row-major entries, rejecting non-finite values."""
    m = np.array([[m11, m12], [m21, m22]], dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"non-finite matrix entries: {m.tolist()}")
    return m


@dataclass(frozen=True)
class SymMat2:
    s11: float
    s12: float
    s22: float

    def __post_init__(self):
        for v in (self.s11, self.s12, self.s22):
            if not math.isfinite(v):
                raise ValueError(f"non-finite entry in {self!r}")

    @classmethod
    def from_array(cls, a) -> SymMat2:
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), 0.5 * float(a[0, 1] + a[1, 0]), float(a[1, 1]))

    @classmethod
    def identity(cls) -> SymMat2:
        return cls(1.0, 0.0, 1.0)

    @classmethod
    def zero(cls) -> SymMat2:
        return cls(0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s12, self.s22]])

    def as_vec(self) -> np.ndarray:
        return np.array([self.s11, self.s12, self.s22])

    @property
    def det(self) -> float:
        return self.s11 * self.s22 - self.s12 * self.s12

    @property
    def trace(self) -> float:
        return self.s11 + self.s22

    def norm(self) -> float:
        """Frobenius norm."""
        return math.sqrt(self.s11**2 + 2.0 * self.s12**2 + self.s22**2)

    def is_psd(self, rtol: float = PSD_RTOL) -> bool:
        scale = abs(self.s11 * self.s22) + self.s12**2
        tol = rtol * max(scale, 1e-300)
        etol = rtol * max(abs(self.s11), abs(self.s22), abs(self.s12))
        return self.s11 >= -etol and self.s22 >= -etol and self.det >= -tol

    def scaled(self, c: float) -> SymMat2:
        return SymMat2(c * self.s11, c * self.s12, c * self.s22)

    def congruence(self, m) -> SymMat2:
        """Return m S m^T."""
        m = np.asarray(m, dtype=float)
        return SymMat2.from_array(m @ self.as_array() @ m.T)

    def __add__(self, other: SymMat2) -> SymMat2:
        return SymMat2(self.s11 + other.s11, self.s12 + other.s12, self.s22 + other.s22)

    def __sub__(self, other: SymMat2) -> SymMat2:
        return SymMat2(self.s11 - other.s11, self.s12 - other.s12, self.s22 - other.s22)


def det2(m) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def trace2(m) -> float:
    return float(m[0, 0] + m[1, 1])


def inv2(m) -> np.ndarray:
    d = det2(m)
    scale = max(abs(m[0, 0] * m[1, 1]), abs(m[0, 1] * m[1, 0]), 1e-300)
    if abs(d) < 1e-14 * scale:
        raise SingularMatrix(f"2x2 matrix is singular: det={d}")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / d


def mat2_pow(m, n: int) -> np.ndarray:
    """Integer power by repeated squaring (n >= 0)."""
    if n < 0:
        raise ValueError("negative powers are not supported")
    result = np.eye(2)
    base = np.array(m, dtype=float)
    while n:
        if n & 1:
            result = result @ base
        base = base @ base
        n >>= 1
    return result


def mat2_exp(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(m t) of a 2x2 matrix.

    Writes m = s I + N with s = trace/2 and N traceless, so N^2 = q I with
    q = (trace^2 - 4 det)/4. The three branches are the trigonometric
    (q < 0), hyperbolic (q > 0) and repeated-root (q ~ 0) closed forms.
    """
    m = np.asarray(m, dtype=float)
    tr = trace2(m)
    det = det2(m)
    s = 0.5 * tr
    n = m - s * np.eye(2)
    disc = tr * tr - 4.0 * det
    q = 0.25 * disc
    width = REPEATED_ROOT_WIDTH * max(1.0, tr * tr, abs(det))
    if abs(disc) <= width:
        # q t^2 is negligible; two series terms are exact to rounding.
        qt2 = q * t * t
        c = 1.0 + qt2 / 2.0 + qt2 * qt2 / 24.0
        sn = t * (1.0 + qt2 / 6.0 + qt2 * qt2 / 120.0)
    elif disc < 0.0:
        beta = math.sqrt(-q)
        c = math.cos(beta * t)
        sn = math.sin(beta * t) / beta
    else:
        gamma = math.sqrt(q)
        c = math.cosh(gamma * t)
        sn = math.sinh(gamma * t) / gamma
    return math.exp(s * t) * (c * np.eye(2) + sn * n)


def eig2(m) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 matrix.

    Ordered by descending modulus, ties broken by descending imaginary part.
    """
    tr = trace2(m)
    det = det2(m)
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        # Stable form: the larger-magnitude root first, the other via det.
        r = math.sqrt(disc)
        big = 0.5 * (tr + math.copysign(r, tr)) if tr != 0.0 else 0.5 * r
        small = det / big if big != 0.0 else 0.5 * (tr - r)
        roots = [complex(big, 0.0), complex(small, 0.0)]
    else:
        r = math.sqrt(-disc)
        roots = [complex(0.5 * tr, 0.5 * r), complex(0.5 * tr, -0.5 * r)]
    roots.sort(key=lambda z: (-abs(z), -z.imag))
    return roots[0], roots[1]


def spectral_radius2(m) -> float:
    return abs(eig2(m)[0])


def solve3(m, v) -> np.ndarray:
    """Solve m x = v for 3x3 m by Gaussian elimination with partial pivoting."""
    a = np.array(m, dtype=float)
    b = np.array(v, dtype=float)
    row_norm = float(np.max(np.sum(np.abs(a), axis=1)))
    tol = 1e-14 * max(row_norm, 1e-300)
    for k in range(3):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < tol:
            raise SingularMatrix(f"pivot {a[p, k]:.3e} below tolerance {tol:.3e}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, 3):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(3)
    for i in (2, 1, 0):
        x[i] = (b[i] - a[i, i + 1:] @ x[i + 1:]) / a[i, i]
    return x


def det3(m) -> float:
    m = np.asarray(m, dtype=float)
    return float(
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def chol2(s: SymMat2) -> np.ndarray:
    """Lower-triangular L with L L^T = s.

    A zero (1,1) entry is a degenerate direction: the first column of L is
    returned as zero.
    """
    scale = abs(s.s11 * s.s22) + s.s12**2
    etol = PSD_RTOL * max(abs(s.s11), abs(s.s22), abs(s.s12))
    if s.s11 < -etol or s.s22 < -etol or s.det < -PSD_RTOL * scale:
        raise NotPSD(f"matrix is not positive-semidefinite: {s}")
    if s.s11 <= etol:
        return np.array([[0.0, 0.0], [0.0, math.sqrt(max(s.s22, 0.0))]])
    l11 = math.sqrt(s.s11)
    l21 = s.s12 / l11
    l22 = math.sqrt(max(s.s22 - l21 * l21, 0.0))
    return np.array([[l11, 0.0], [l21, l22]])

