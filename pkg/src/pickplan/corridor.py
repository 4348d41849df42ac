"""Flight corridor: greedy axis-aligned free boxes around the grid path,
plus the designed grasp-stage polyhedron."""

from dataclasses import dataclass

import numpy as np

from .errors import CorridorGapError
from .geometry import Aabb, HalfspacePolytope, yaw_rotation


@dataclass(frozen=True)
class Corridor:
    """Ordered overlapping free boxes with per-cell time spans."""

    boxes: tuple
    cells: tuple
    witnesses: tuple
    durations: tuple

    def __post_init__(self):
        if len(self.boxes) != len(self.cells) or len(self.boxes) != len(self.durations):
            raise ValueError("inconsistent corridor lengths")
        if len(self.witnesses) != max(len(self.boxes) - 1, 0):
            raise ValueError("need one overlap witness per adjacent pair")
        if any(d <= 0 for d in self.durations):
            raise ValueError("durations must be positive")

    def contains(self, p, tol=0.0):
        return any(c.contains(p, tol) for c in self.cells)

    def total_duration(self):
        return float(sum(self.durations))


def _grow_box(occ, dims, seed, margin):
    """Grow [lo, hi] cell ranges from a seed cell, one face at a time.

    Faces advance round-robin (-x, +x, -y, +y, -z, +z) while the new slab
    is free and at least `margin` cells from the grid border.
    """
    lo = np.array(seed, dtype=int)
    hi = np.array(seed, dtype=int)
    lo_lim = np.full(3, margin)
    hi_lim = np.array(dims) - 1 - margin
    blocked = [False] * 6
    while not all(blocked):
        for face in range(6):
            if blocked[face]:
                continue
            ax = face // 2
            grow_hi = face % 2 == 1
            if grow_hi:
                if hi[ax] + 1 > hi_lim[ax]:
                    blocked[face] = True
                    continue
                trial_lo, trial_hi = lo.copy(), hi.copy()
                trial_lo[ax] = trial_hi[ax] = hi[ax] + 1
            else:
                if lo[ax] - 1 < lo_lim[ax]:
                    blocked[face] = True
                    continue
                trial_lo, trial_hi = lo.copy(), hi.copy()
                trial_lo[ax] = trial_hi[ax] = lo[ax] - 1
            slab = occ[
                trial_lo[0]: trial_hi[0] + 1,
                trial_lo[1]: trial_hi[1] + 1,
                trial_lo[2]: trial_hi[2] + 1,
            ]
            if slab.any():
                blocked[face] = True
                continue
            if grow_hi:
                hi[ax] += 1
            else:
                lo[ax] -= 1
    return lo, hi


def _box_world(grid, lo, hi):
    return Aabb(grid.origin + lo * grid.cell_size, grid.origin + (hi + 1) * grid.cell_size)


def _trapezoid_durations(lengths, v_max, a_max):
    """Per-cell durations from one rest-to-rest trapezoid over the full path.

    A single velocity profile is laid over the cumulative arc length, so the
    base crosses interior cell boundaries at speed instead of stopping in
    every cell.  The acceleration budget is halved to leave headroom for the
    smoothing stage, which rounds the profile's corners.
    """
    lengths = np.maximum(np.asarray(lengths, dtype=float), 1e-6)
    total = float(np.sum(lengths))
    a = 0.5 * a_max
    v = min(v_max, np.sqrt(total * a))
    t_ramp = v / a
    d_ramp = 0.5 * v * t_ramp

    t_total = 2.0 * t_ramp + max(total - 2.0 * d_ramp, 0.0) / v

    def time_at(s):
        if s <= d_ramp:
            return np.sqrt(2.0 * s / a)
        if s >= total - d_ramp:
            return t_total - np.sqrt(max(2.0 * (total - s) / a, 0.0))
        return t_ramp + (s - d_ramp) / v

    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    times = [time_at(s) for s in cum]
    times[-1] = t_total
    return tuple(max(b - a_, 1e-3) for a_, b in zip(times, times[1:]))


def generate_corridor(grid, path, r_S, v_max, a_max):
    """Overlapping free boxes covering the path on the r_S-inflated grid."""
    inflated = grid.inflate(r_S)
    occ = inflated.occupancy
    dims = occ.shape
    margin = int(np.ceil(r_S / grid.cell_size))
    wps = path.waypoints
    cells_idx = [inflated.world_to_cell(w) for w in wps]
    for k, c in enumerate(cells_idx):
        if occ[c]:
            raise CorridorGapError(f"path waypoint {k} occupied after inflation")

    boxes = []
    covered_until = []
    k = 0
    while True:
        lo, hi = _grow_box(occ, dims, cells_idx[k], margin)
        box = _box_world(inflated, lo, hi)
        last = k
        for j in range(k, len(wps)):
            if box.contains(wps[j], tol=1e-9):
                last = j
            elif j > k:
                break
        if not box.contains(wps[k], tol=1e-9):
            raise CorridorGapError(f"grown box misses its seed waypoint {k}")
        boxes.append(box)
        covered_until.append(last)
        if last >= len(wps) - 1:
            break
        if len(boxes) > 1 and last <= covered_until[-2]:
            raise CorridorGapError(f"no progress past waypoint {last}")
        k = last + 1
    # merge duplicate consecutive boxes
    dedup = [boxes[0]]
    dedup_until = [covered_until[0]]
    for b, cu in zip(boxes[1:], covered_until[1:]):
        if np.allclose(b.lo, dedup[-1].lo) and np.allclose(b.hi, dedup[-1].hi):
            dedup_until[-1] = cu
        else:
            dedup.append(b)
            dedup_until.append(cu)
    boxes, covered_until = dedup, dedup_until

    witnesses = []
    for a, b in zip(boxes, boxes[1:]):
        inter = a.intersection(b)
        if inter is None:
            raise CorridorGapError("adjacent corridor cells do not overlap")
        witnesses.append(inter.center())

    # per-cell path length: split arcs at handoff waypoints
    lengths = []
    prev = 0
    arc = np.linalg.norm(np.diff(wps, axis=0), axis=1) if len(wps) > 1 else np.zeros(0)
    for i, cu in enumerate(covered_until):
        last = cu if i < len(covered_until) - 1 else len(wps) - 1
        lengths.append(float(np.sum(arc[prev:last])) if last > prev else grid.cell_size)
        prev = last
    durations = _trapezoid_durations(lengths, v_max, a_max)
    cells = tuple(HalfspacePolytope.from_aabb(b) for b in boxes)
    return Corridor(tuple(boxes), cells, tuple(witnesses), durations)


def designed_polyhedron(p_B_f, psi_O, W_R):
    """Grasp-stage cell: w_min <= R_yaw^T (p - p_B_f) <= w_max."""
    R = yaw_rotation(psi_O)
    A = np.vstack([R.T, -R.T])
    b = np.concatenate([W_R.w_max + R.T @ p_B_f, -(W_R.w_min + R.T @ p_B_f)])
    return HalfspacePolytope(A, b)
