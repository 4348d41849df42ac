"""Arm shape polyhedron, local-map filtering, collision sweeps, and the
pinhole-mirror weight updates that drive the avoidance iteration."""

from dataclasses import dataclass, field

import numpy as np

from .geometry import Aabb, ConvexPolyhedronV, as_vec3, yaw_rotation
from .gjk import gjk_query

SWEEP_DT = 5e-3
VERIFY_DT = 5e-4


@dataclass(frozen=True)
class ShapePolyhedron:
    """Six-vertex convex body standing in for the arm plus gripper."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (6, 3):
            raise ValueError("shape polyhedron has exactly 6 vertices")
        object.__setattr__(self, "vertices", v)
        self.vertices.setflags(write=False)

    @property
    def upper(self):
        return self.vertices[:3]

    @property
    def lower(self):
        return self.vertices[3:]


def shape_polyhedron(p_B, p_E, psi, mount, r_S, l_C):
    """Upper triangle around the base, lower triangle offset from the
    end-effector, both expressed through the yawed mount orientation."""
    R = yaw_rotation(psi) @ mount.R_D_B
    verts = np.empty((6, 3))
    for i in (1, 2, 3):
        ang = (1 + 2 * i) * np.pi / 3.0
        verts[i - 1] = as_vec3(p_B) + R @ np.array([r_S * np.cos(ang), r_S * np.sin(ang), 0.0])
    for i in (1, 2, 3):
        ang = (1 + 2 * i) * np.pi / 6.0
        verts[2 + i] = as_vec3(p_E) + R @ np.array([l_C * np.cos(ang), l_C * np.sin(ang), l_C])
    return ShapePolyhedron(verts)


def local_map_box(p_B_tB, p_O, l_s):
    """Axis-aligned box around base and object, padded by l_s."""
    if l_s < 0:
        raise ValueError("l_s must be >= 0")
    a = as_vec3(p_B_tB)
    b = as_vec3(p_O)
    return Aabb(np.minimum(a, b) - l_s, np.maximum(a, b) + l_s)


@dataclass(frozen=True)
class CollisionInterval:
    """First/last colliding end-effector reference positions per obstacle."""

    obstacle_id: str
    T_L: np.ndarray
    T_R: np.ndarray
    t_L: float
    t_R: float

    def __post_init__(self):
        if self.t_L > self.t_R:
            raise ValueError("t_L must be <= t_R")
        object.__setattr__(self, "T_L", as_vec3(self.T_L))
        object.__setattr__(self, "T_R", as_vec3(self.T_R))

    def length(self):
        return float(np.linalg.norm(self.T_L - self.T_R))


@dataclass
class MirrorEntry:
    obstacle_id: str
    p_M: np.ndarray
    weight: float


@dataclass
class ObstacleMirrorSet:
    """Accumulated mirror points; weights only ever grow."""

    entries: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(sorted(self.entries.values(), key=lambda e: e.obstacle_id))

    def __len__(self):
        return len(self.entries)


def _obstacle_aabb(obstacle):
    v = obstacle.vertices
    return Aabb(v.min(axis=0), v.max(axis=0))


def _aabb_overlap(a, b):
    return bool(np.all(a.lo <= b.hi) and np.all(b.lo <= a.hi))


def sweep_collisions(ee_traj, quad_traj, psi, mount, r_S, l_C, obstacles, box, dt=SWEEP_DT, query_counter=None):
    """Sample both trajectories and GJK the arm shape against each obstacle
    whose bounding box meets the local map box.  Empty list = collision-free.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    t0, t1 = ee_traj.t0, ee_traj.t1
    n = max(int(np.ceil((t1 - t0) / dt)), 1)
    times = np.linspace(t0, t1, n + 1)
    ee_pts = [ee_traj.position(t) for t in times]
    quad_pts = [quad_traj.position(t) for t in times]

    intervals = []
    for obs_id in sorted(obstacles):
        obstacle = obstacles[obs_id]
        if not _aabb_overlap(_obstacle_aabb(obstacle), box):
            continue
        first = last = None
        for k, t in enumerate(times):
            shape = shape_polyhedron(quad_pts[k], ee_pts[k], psi, mount, r_S, l_C)
            if query_counter is not None:
                query_counter[obs_id] = query_counter.get(obs_id, 0) + 1
            if gjk_query(ConvexPolyhedronV(shape.vertices), obstacle).intersects:
                if first is None:
                    first = k
                last = k
        if first is not None:
            intervals.append(
                CollisionInterval(obs_id, ee_pts[first], ee_pts[last], float(times[first]), float(times[last]))
            )
    return intervals


def pinhole_mirror(T_L, T_R, obstacle_centroid):
    """Point-reflect the obstacle center through the collision midpoint."""
    p_P = 0.5 * (as_vec3(T_L) + as_vec3(T_R))
    return 2.0 * p_P - as_vec3(obstacle_centroid)


def update_weights(mirrors, intervals, obstacles, alpha):
    """Insert or bump mirror weights by alpha * interval length; mirrors of
    obstacles that stopped colliding persist unchanged."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    for iv in intervals:
        centroid = obstacles[iv.obstacle_id].centroid()
        p_M = pinhole_mirror(iv.T_L, iv.T_R, centroid)
        delta = alpha * iv.length()
        entry = mirrors.entries.get(iv.obstacle_id)
        if entry is None:
            mirrors.entries[iv.obstacle_id] = MirrorEntry(iv.obstacle_id, p_M, delta)
        else:
            entry.weight += delta
            entry.p_M = p_M
    return mirrors
