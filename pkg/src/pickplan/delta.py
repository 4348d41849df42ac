"""Delta-arm forward/inverse kinematics and convex workspace approximation.

Arm frame: origin at the top-base center, z toward gravity, so the
end-effector hangs at positive z.  Arm i swings in the vertical plane at
azimuth (i-1)*pi/3; the elbow formula carries a sign flip on x, matching
the platform's mechanical layout.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHullError, NoIntersectionError, UnreachableError
from .geometry import HalfspacePolytope, as_vec3, check_rotation

FK_RESIDUAL_TOL = 1e-9
DEFAULT_JOINT_LIMITS = (0.2, 1.4)
WORKSPACE_SHRINK = 0.01


@dataclass(frozen=True)
class DeltaParams:
    """Arm geometry: upper/lower link lengths, base radii, gripper length."""

    l_U: float
    l_L: float
    r_F: float
    r_M: float
    l_g: float

    def __post_init__(self):
        for name in ("l_U", "l_L", "r_F", "r_M", "l_g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.l_L <= abs(self.r_F - self.r_M):
            raise ValueError("lower arm too short to reach centered poses")

    @property
    def gripper_offset(self):
        return np.array([0.0, 0.0, self.l_g])


DEFAULT_DELTA_PARAMS = DeltaParams(l_U=0.10, l_L=0.40, r_F=0.06, r_M=0.03, l_g=0.10)


@dataclass(frozen=True)
class MountTransform:
    """Pose of the arm frame in the body frame."""

    R_D_B: np.ndarray
    p_C_B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R_D_B", check_rotation(self.R_D_B))
        object.__setattr__(self, "p_C_B", as_vec3(self.p_C_B))
        self.R_D_B.setflags(write=False)
        self.p_C_B.setflags(write=False)


def default_mount():
    """Arm hangs under the body: arm z (down) against body z (up)."""
    R = np.diag([1.0, -1.0, -1.0])
    return MountTransform(R, np.array([0.0, 0.0, -0.28]))


def _arm_direction(i):
    theta = (i - 1) * np.pi / 3.0
    return np.array([-np.cos(theta), np.sin(theta), 0.0])


def elbow_point(params, q_i, i):
    """Elbow position h_i for arm i at joint angle q_i."""
    if i not in (1, 2, 3):
        raise ValueError("arm index must be 1, 2, or 3")
    radial = params.r_F - params.r_M + params.l_U * np.cos(q_i)
    h = radial * _arm_direction(i)
    h[2] = params.l_U * np.sin(q_i)
    return h


def _sphere_centers(params, q):
    return np.array([elbow_point(params, q[i], i + 1) for i in range(3)])


def forward_kinematics(params, q):
    """End-effector position from joint angles (three-sphere intersection).

    Picks the root with greater z in the arm frame (end-effector hangs
    below the base).
    """
    q = np.asarray(q, dtype=float).reshape(3)
    c1, c2, c3 = _sphere_centers(params, q)
    ex = c2 - c1
    d = np.linalg.norm(ex)
    if d < 1e-12:
        raise NoIntersectionError("coincident sphere centers")
    ex = ex / d
    i2 = ex @ (c3 - c1)
    ey = c3 - c1 - i2 * ex
    j = np.linalg.norm(ey)
    if j < 1e-12:
        raise NoIntersectionError("collinear sphere centers")
    ey = ey / j
    ez = np.cross(ex, ey)
    x = 0.5 * d
    y = (i2 * i2 + j * j) / (2.0 * j) - i2 * x / j
    radicand = params.l_L**2 - x * x - y * y
    if radicand < 0.0:
        raise NoIntersectionError("spheres admit no common point")
    z = np.sqrt(radicand)
    base = c1 + x * ex + y * ey
    cand = base + z * ez if (base + z * ez)[2] >= (base - z * ez)[2] else base - z * ez
    return cand - params.gripper_offset


def fk_residuals(params, q, p_E_D):
    """Per-arm residuals |y - h_i|^2 - l_L^2 with y the wrist point."""
    y = as_vec3(p_E_D) + params.gripper_offset
    centers = _sphere_centers(params, np.asarray(q, dtype=float).reshape(3))
    return np.array([np.sum((y - c) ** 2) - params.l_L**2 for c in centers])


def inverse_kinematics(params, p_E_D):
    """Joint angles for a target position; elbow-out (smaller angle) branch."""
    y = as_vec3(p_E_D) + params.gripper_offset
    q = np.empty(3)
    for i in (1, 2, 3):
        u = _arm_direction(i)
        w = y - (params.r_F - params.r_M) * u
        a = w @ u
        b = w[2]
        c = (w @ w + params.l_U**2 - params.l_L**2) / (2.0 * params.l_U)
        r = np.hypot(a, b)
        if r < 1e-12 or abs(c) > r:
            raise UnreachableError(f"arm {i} has no real joint solution")
        base = np.arctan2(b, a)
        dq = np.arccos(np.clip(c / r, -1.0, 1.0))
        q[i - 1] = base - dq  # elbow-out: the smaller of the two roots
    return q


def ee_in_body(mount, p_E_D):
    """Affine map of an arm-frame point into the body frame."""
    return mount.R_D_B @ as_vec3(p_E_D) + mount.p_C_B


def approximate_workspace(params, joint_limits=DEFAULT_JOINT_LIMITS, n_samples=4096, shrink=WORKSPACE_SHRINK, rng=None):
    """Halfspace hull of FK samples over a joint-limit grid, shrunk inward.

    The shrink margin keeps the polytope a conservative inner approximation
    of the true workspace between grid samples.  When an rng is supplied,
    the grid is augmented with the same number of random joint samples,
    which densifies the hull without changing its conservative character.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    per_axis = int(np.ceil(n_samples ** (1.0 / 3.0)))
    grid = np.linspace(joint_limits[0], joint_limits[1], per_axis)
    configs = [(qa, qb, qc) for qa in grid for qb in grid for qc in grid]
    if rng is not None:
        extra = rng.uniform(joint_limits[0], joint_limits[1], size=(n_samples, 3))
        configs.extend(map(tuple, extra))
    pts = []
    for q in configs:
        try:
            pts.append(forward_kinematics(params, q))
        except NoIntersectionError:
            continue
    pts = np.array(pts)
    if pts.shape[0] < 4:
        raise DegenerateHullError("too few reachable samples")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateHullError("workspace samples are degenerate") from exc
    A = hull.equations[:, :3]
    b = -hull.equations[:, 3]
    norms = np.linalg.norm(A, axis=1)
    return HalfspacePolytope(A / norms[:, None], b / norms - shrink)
