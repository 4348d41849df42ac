"""Core geometric primitives: rotations, convex polytopes, occupancy grids.

Positions are plain length-3 numpy arrays in meters.  World frame: z up,
yaw about z.  All types are immutable values after construction and all
operations are pure functions.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import linprog

from .errors import EmptyIntersectionError

ORTHONORMAL_TOL = 1e-9


def as_vec3(v):
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("vector components must be finite")
    return a


def yaw_rotation(psi):
    """Rotation about the z axis by ``psi`` radians."""
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pitch_rotation(theta):
    """Rotation about the y axis by ``theta`` radians."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def roll_rotation(phi):
    """Rotation about the x axis by ``phi`` radians."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def tilt_rotation(theta, phi):
    """Pitch-then-roll rotation: pitch about y, then roll about x."""
    return pitch_rotation(theta) @ roll_rotation(phi)


def check_rotation(R, tol=ORTHONORMAL_TOL):
    R = np.asarray(R, dtype=float).reshape(3, 3)
    if np.max(np.abs(R @ R.T - np.eye(3))) > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > max(tol, 1e-9):
        raise ValueError("matrix determinant is not +1")
    return R


@dataclass(frozen=True)
class HalfspacePolytope:
    """Convex region {p | A p <= b} with unit-norm rows."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0] or A.shape[1] != 3:
            raise ValueError("inconsistent halfspace dimensions")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms <= 0):
            raise ValueError("zero normal row")
        object.__setattr__(self, "A", A / norms[:, None])
        object.__setattr__(self, "b", b / norms)
        self.A.setflags(write=False)
        self.b.setflags(write=False)

    @classmethod
    def from_aabb(cls, box):
        A = np.vstack([np.eye(3), -np.eye(3)])
        b = np.concatenate([box.hi, -box.lo])
        return cls(A, b)

    def contains(self, p, tol=0.0):
        return bool(np.all(self.A @ as_vec3(p) <= self.b + tol))

    def contains_many(self, pts, tol=0.0):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.all(pts @ self.A.T <= self.b + tol, axis=1)

    def margin(self, p):
        """Largest constraint violation; negative means strictly inside."""
        return float(np.max(self.A @ as_vec3(p) - self.b))

    def stacked(self, *others):
        A = np.vstack([self.A] + [o.A for o in others])
        b = np.concatenate([self.b] + [o.b for o in others])
        return HalfspacePolytope(A, b)

    def interior_point(self):
        """Chebyshev center, or None if the interior is empty.

        LP: max r  s.t.  A x + r <= b (rows are unit norm), r >= 0.
        """
        m = self.A.shape[0]
        c = np.zeros(4)
        c[3] = -1.0
        A_ub = np.hstack([self.A, np.ones((m, 1))])
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=[(None, None)] * 3 + [(0, None)], method="highs")
        if not res.success or res.x[3] <= 1e-12:
            return None
        return res.x[:3].copy()


@dataclass(frozen=True)
class ConvexPolyhedronV:
    """Convex body given as the hull of a finite vertex set."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 1 or v.shape[1] != 3:
            raise ValueError("need at least one 3D vertex")
        object.__setattr__(self, "vertices", v)
        self.vertices.setflags(write=False)

    def translated(self, t):
        return ConvexPolyhedronV(self.vertices + as_vec3(t))

    def centroid(self):
        return self.vertices.mean(axis=0)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vec3(self.lo)
        hi = as_vec3(self.hi)
        if np.any(lo > hi):
            raise ValueError("lo must be <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    def vertices(self):
        """The 8 corners as a ConvexPolyhedronV."""
        corners = np.array(
            [[self.lo[0] if i & 1 == 0 else self.hi[0],
              self.lo[1] if i & 2 == 0 else self.hi[1],
              self.lo[2] if i & 4 == 0 else self.hi[2]] for i in range(8)]
        )
        return ConvexPolyhedronV(corners)

    def contains(self, p, tol=0.0):
        p = as_vec3(p)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def intersection(self, other):
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Aabb(lo, hi)

    def center(self):
        return 0.5 * (self.lo + self.hi)


def aabb_vertices(box):
    return box.vertices()


def polytope_contains(poly, p, tol=0.0):
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return poly.contains(p, tol)


@dataclass(frozen=True)
class GridMap3D:
    """Dense boolean occupancy grid; cell centers at origin + (i + 0.5) * h."""

    origin: np.ndarray
    cell_size: float
    occupancy: np.ndarray = field(repr=False)

    def __post_init__(self):
        origin = as_vec3(self.origin)
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.ndim != 3:
            raise ValueError("occupancy must be 3D")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "_inflated", {})
        self.origin.setflags(write=False)
        self.occupancy.setflags(write=False)

    @property
    def dims(self):
        return self.occupancy.shape

    def cell_center(self, idx):
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.cell_size

    def world_to_cell(self, p):
        """Nearest cell index for a world point."""
        idx = np.floor((as_vec3(p) - self.origin) / self.cell_size).astype(int)
        return tuple(np.clip(idx, 0, np.array(self.dims) - 1))

    def in_bounds(self, idx):
        return all(0 <= idx[k] < self.dims[k] for k in range(3))

    def is_occupied(self, idx):
        return bool(self.occupancy[idx])

    def inflate(self, radius):
        """Minkowski-dilate occupancy by a ball of the given metric radius.

        Results are cached per radius; planning inflates the same static
        grid several times per mission.
        """
        if radius <= 0:
            return self
        key = float(radius)
        cached = self._inflated.get(key)
        if cached is not None:
            return cached
        r = int(np.ceil(radius / self.cell_size))
        g = np.arange(-r, r + 1)
        dx, dy, dz = np.meshgrid(g, g, g, indexing="ij")
        ball = (dx**2 + dy**2 + dz**2) * self.cell_size**2 <= radius**2 + 1e-12
        occ = ndimage.binary_dilation(self.occupancy, structure=ball)
        result = GridMap3D(self.origin, self.cell_size, occ)
        self._inflated[key] = result
        return result


def require_interior(poly, what="polytope"):
    p = poly.interior_point()
    if p is None:
        raise EmptyIntersectionError(f"{what} has empty interior")
    return p
