"""Tilted workspaces, their intersection, and the revised-workspace cuboid.

The coupling between base and end-effector positions reduces to the box
bound w_min <= R_yaw^T (p_E - p_B) <= w_max once the largest axis-aligned
cuboid inscribed in the tilt-swept workspace intersection is known.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import EmptyIntersectionError
from .geometry import HalfspacePolytope, as_vec3, tilt_rotation, yaw_rotation

DEFAULT_TILT_BOUND = np.deg2rad(10.0)
FEASIBILITY_TOL = 1e-6
CORNER_TOL = 1e-9


@dataclass(frozen=True)
class TiltBounds:
    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float

    def __post_init__(self):
        if not (self.theta_min <= 0.0 <= self.theta_max and self.phi_min <= 0.0 <= self.phi_max):
            raise ValueError("tilt bounds must bracket zero")
        if max(map(abs, (self.theta_min, self.theta_max, self.phi_min, self.phi_max))) >= np.pi / 2:
            raise ValueError("tilt bounds must be below pi/2")


def default_tilt_bounds():
    t = DEFAULT_TILT_BOUND
    return TiltBounds(-t, t, -t, t)


@dataclass(frozen=True)
class RevisedWorkspace:
    """Axis-aligned cuboid [w_min, w_max] of feasible end-effector offsets."""

    w_min: np.ndarray
    w_max: np.ndarray

    def __post_init__(self):
        w_min = as_vec3(self.w_min)
        w_max = as_vec3(self.w_max)
        if np.any(w_min > w_max):
            raise ValueError("w_min must be <= w_max componentwise")
        object.__setattr__(self, "w_min", w_min)
        object.__setattr__(self, "w_max", w_max)
        self.w_min.setflags(write=False)
        self.w_max.setflags(write=False)

    def center(self):
        return 0.5 * (self.w_min + self.w_max)

    def corners(self):
        return np.array(
            [[self.w_min[0] if i & 1 == 0 else self.w_max[0],
              self.w_min[1] if i & 2 == 0 else self.w_max[1],
              self.w_min[2] if i & 4 == 0 else self.w_max[2]] for i in range(8)]
        )


def tilted_workspace(W, mount, theta, phi):
    """Arm workspace seen from the yawless inertial frame at a fixed tilt.

    Maps {p_D | A p_D <= b} through p = R_tilt (R_D_B p_D + p_C_B):
    A (R_tilt R_D_B)^T p <= b + A R_D_B^T p_C_B.
    """
    R = tilt_rotation(theta, phi) @ mount.R_D_B
    return HalfspacePolytope(W.A @ R.T, W.b + W.A @ (mount.R_D_B.T @ mount.p_C_B))


def workspace_intersection(W, mount, tilts):
    """Stacked halfspaces of the four tilt-extreme workspaces."""
    parts = [
        tilted_workspace(W, mount, tilts.theta_min, 0.0),
        tilted_workspace(W, mount, tilts.theta_max, 0.0),
        tilted_workspace(W, mount, 0.0, tilts.phi_min),
        tilted_workspace(W, mount, 0.0, tilts.phi_max),
    ]
    stacked = parts[0].stacked(*parts[1:])
    if stacked.interior_point() is None:
        raise EmptyIntersectionError("tilted workspaces have empty intersection")
    return stacked


def inscribed_cuboid(W_I):
    """Large axis-aligned cuboid in W_I by a two-stage LP.

    Variables (w_min, w_max, m); all 8 corners must satisfy A p <= b and
    every edge must be at least m.  Stage one maximizes the shortest edge m
    (a pure sum-of-edges objective can collapse an axis entirely, which is
    useless as a workspace box); stage two maximizes the total edge length
    with the shortest edge pinned at its optimum.  Linear and deterministic.
    """
    A, b = W_I.A, W_I.b
    rows = []
    rhs = []
    for mask in range(8):
        # corner picks w_min or w_max per axis
        sel = np.zeros((3, 7))
        for ax in range(3):
            sel[ax, ax + (3 if mask & (1 << ax) else 0)] = 1.0
        rows.append(A @ sel)
        rhs.append(b)
    for ax in range(3):
        # m <= w_max[ax] - w_min[ax]
        row = np.zeros(7)
        row[ax] = 1.0
        row[ax + 3] = -1.0
        row[6] = 1.0
        rows.append(row[None, :])
        rhs.append(np.zeros(1))
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    bounds = [(None, None)] * 6 + [(0.0, None)]

    c1 = np.zeros(7)
    c1[6] = -1.0  # maximize the shortest edge
    res = linprog(c1, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise EmptyIntersectionError("no inscribed cuboid: intersection empty")
    m_star = res.x[6]

    c2 = np.concatenate([np.ones(3), -np.ones(3), [0.0]])
    bounds[6] = (m_star, m_star)
    res = linprog(c2, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise EmptyIntersectionError("no inscribed cuboid: intersection empty")
    ws = RevisedWorkspace(res.x[:3], res.x[3:6])
    worst = max(W_I.margin(c) for c in ws.corners())
    if worst > CORNER_TOL:
        raise EmptyIntersectionError("inscribed cuboid corners escape the intersection")
    return ws


def geometric_feasibility_ok(p_E, p_B, psi_O, W_R, tol=FEASIBILITY_TOL):
    """Box bound w_min <= R_yaw^T (p_E - p_B) <= w_max within tol."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    d = yaw_rotation(psi_O).T @ (as_vec3(p_E) - as_vec3(p_B))
    return bool(np.all(d >= W_R.w_min - tol) and np.all(d <= W_R.w_max + tol))


def geometric_feasibility_margin(p_E, p_B, psi_O, W_R):
    """Smallest slack of the offset box; negative means violated."""
    d = yaw_rotation(psi_O).T @ (as_vec3(p_E) - as_vec3(p_B))
    return float(min(np.min(d - W_R.w_min), np.min(W_R.w_max - d)))
