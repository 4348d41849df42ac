"""Bezier segments, Bernstein bases, derivative control points, fitting."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OutOfDomainError, SingularSystemError

JOINT_CONTINUITY_TOL = 1e-6


@lru_cache(maxsize=None)
def _pascal_row(n):
    row = [1]
    for _ in range(n):
        row = [1] + [row[i] + row[i + 1] for i in range(len(row) - 1)] + [1]
    return tuple(row)


def binom(n, i):
    return _pascal_row(n)[i]


def bernstein(i, n, tau):
    """Basis value binom(n, i) * tau^i * (1 - tau)^(n - i)."""
    if not 0 <= i <= n:
        raise ValueError("need 0 <= i <= n")
    return binom(n, i) * tau**i * (1.0 - tau) ** (n - i)


def bernstein_row(n, tau):
    """All n+1 basis values at tau."""
    return np.array([bernstein(i, n, tau) for i in range(n + 1)])


def derivative_control_points(cps, k, scale=1.0):
    """Control points of the k-th physical-time derivative.

    One derivative maps c_i -> n (c_{i+1} - c_i) in curve parameter tau;
    dividing by scale^k converts to derivatives in t where tau = (t-t0)/scale.
    """
    c = np.asarray(cps, dtype=float)
    n = c.shape[0] - 1
    if k > n:
        return np.zeros((1,) + c.shape[1:])
    for j in range(k):
        c = (n - j) * (c[1:] - c[:-1])
    return c / scale**k


@dataclass(frozen=True)
class BezierSegment:
    """Degree-n curve on [t0, t1] with (n+1) 3D control points."""

    control_points: np.ndarray
    t0: float
    t1: float

    def __post_init__(self):
        cps = np.atleast_2d(np.asarray(self.control_points, dtype=float))
        if cps.shape[0] < 2 or cps.shape[1] != 3:
            raise ValueError("need at least two 3D control points")
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        object.__setattr__(self, "control_points", cps)
        self.control_points.setflags(write=False)

    @property
    def degree(self):
        return self.control_points.shape[0] - 1

    @property
    def scale(self):
        return self.t1 - self.t0

    def _tau(self, t, tol=1e-9):
        if t < self.t0 - tol or t > self.t1 + tol:
            raise OutOfDomainError(f"t={t} outside [{self.t0}, {self.t1}]")
        return min(max((t - self.t0) / self.scale, 0.0), 1.0)

    def position(self, t):
        return _de_casteljau(self.control_points, self._tau(t))

    def eval(self, t):
        """Position, velocity, acceleration and jerk at time t."""
        tau = self._tau(t)
        out = []
        for k in range(4):
            c = derivative_control_points(self.control_points, k, self.scale)
            out.append(_de_casteljau(c, tau))
        return tuple(out)

    def derivative_cps(self, k):
        return derivative_control_points(self.control_points, k, self.scale)


def _de_casteljau(cps, tau):
    c = np.array(cps, dtype=float)
    while c.shape[0] > 1:
        c = (1.0 - tau) * c[:-1] + tau * c[1:]
    return c[0]


@dataclass(frozen=True)
class PiecewiseBezier:
    """Segments with abutting time intervals, C2 at the joints."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("need at least one segment")
        for a, b in zip(segs, segs[1:]):
            if abs(a.t1 - b.t0) > 1e-9:
                raise ValueError("segments must abut in time")
        object.__setattr__(self, "segments", segs)

    @property
    def t0(self):
        return self.segments[0].t0

    @property
    def t1(self):
        return self.segments[-1].t1

    def segment_at(self, t, tol=1e-9):
        if t < self.t0 - tol or t > self.t1 + tol:
            raise OutOfDomainError(f"t={t} outside [{self.t0}, {self.t1}]")
        for seg in self.segments:
            if t <= seg.t1 + 1e-12:
                return seg
        return self.segments[-1]

    def position(self, t):
        return self.segment_at(t).position(t)

    def eval(self, t):
        return self.segment_at(t).eval(t)

    def joint_mismatch(self):
        """Worst pos/vel/acc discontinuity across interior joints."""
        worst = 0.0
        for a, b in zip(self.segments, self.segments[1:]):
            ea = a.eval(a.t1)
            eb = b.eval(b.t0)
            for k in range(3):
                worst = max(worst, float(np.linalg.norm(ea[k] - eb[k])))
        return worst


def fit_bezier(samples, degree):
    """Interpolating control points through degree+1 samples at uniform tau.

    Solves the square Bernstein collocation system; the fitted curve passes
    through every sample.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[0] != degree + 1:
        raise ValueError("need exactly degree+1 samples")
    taus = np.linspace(0.0, 1.0, degree + 1)
    M = np.array([bernstein_row(degree, tau) for tau in taus])
    if np.linalg.cond(M) > 1e14:
        raise SingularSystemError("collocation system is singular")
    return np.linalg.solve(M, pts)


def bernstein_product_integrals(m):
    """G[i, j] = integral_0^1 b_{i,m} b_{j,m} dtau, exact closed form."""
    G = np.empty((m + 1, m + 1))
    for i in range(m + 1):
        for j in range(m + 1):
            G[i, j] = binom(m, i) * binom(m, j) / (binom(2 * m, i + j) * (2 * m + 1))
    return G


def jerk_hessian(degree, scale):
    """Hessian of the integrated squared physical jerk in position cps.

    Third-derivative control points are a linear map D3 of the position
    control points; the integral in physical time contributes scale^-5.
    """
    n = degree
    D = np.eye(n + 1)
    for j in range(3):
        m = n - j
        diff = np.zeros((m, m + 1))
        for i in range(m):
            diff[i, i] = -m
            diff[i, i + 1] = m
        D = diff @ D
    G = bernstein_product_integrals(n - 3)
    H = scale**-5 * (D.T @ G @ D)
    return 0.5 * (H + H.T)  # exact symmetry despite fp rounding in the matmuls
