"""A* search on the occupancy grid, grasp base position, workspace top point."""

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import GoalOccupiedError, NoPathError, StartOccupiedError
from .geometry import as_vec3, yaw_rotation

# 26-connected neighborhood with Euclidean step costs (plain Python
# scalars: the search loop is much faster without numpy scalar overhead)
_OFFSETS = [
    (dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)
]
_STEP_COSTS = [float(np.linalg.norm(o)) for o in _OFFSETS]
_SQRT2 = float(np.sqrt(2.0))
_SQRT3 = float(np.sqrt(3.0))


@dataclass(frozen=True)
class GridPath:
    """Ordered cell-center waypoints of a grid path."""

    waypoints: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        object.__setattr__(self, "waypoints", w)
        self.waypoints.setflags(write=False)

    def length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)))


def feasible_grasp_position(p_O, psi_O, W_R):
    """Base position placing the workspace center on the object."""
    return as_vec3(p_O) - yaw_rotation(psi_O) @ W_R.center()


def workspace_top_point(W_R):
    """Stowed end-effector offset: workspace x/y center at the z lower bound."""
    c = W_R.center()
    return np.array([c[0], c[1], W_R.w_min[2]])


def astar(grid, start, goal, inflate_radius):
    """Minimal-cost 26-connected path on the inflated grid.

    Euclidean edge costs with the (admissible) Euclidean heuristic;
    lexicographic (f, h, cell index) tie-break for determinism.
    """
    inflated = grid.inflate(inflate_radius)
    occ = inflated.occupancy
    nx, ny, nz = occ.shape
    s = inflated.world_to_cell(start)
    g = inflated.world_to_cell(goal)
    if occ[s]:
        raise StartOccupiedError(f"start cell {s} occupied after inflation")
    if occ[g]:
        raise GoalOccupiedError(f"goal cell {g} occupied after inflation")

    # pad the grid with an occupied 1-cell border so the expansion loop
    # needs no bounds checks, then search on flat padded indices with
    # list-based tables (much faster than dict/tuple bookkeeping)
    pyz = (ny + 2) * (nz + 2)
    pz = nz + 2
    free_pad = np.zeros((nx + 2, ny + 2, nz + 2), dtype=np.uint8)
    free_pad[1:-1, 1:-1, 1:-1] = ~occ
    free = free_pad.tobytes()
    flat_deltas = [dx * pyz + dy * pz + dz for dx, dy, dz in _OFFSETS]
    moves = list(zip(_OFFSETS, flat_deltas, _STEP_COSTS))

    gx, gy, gz = (g[0] + 1, g[1] + 1, g[2] + 1)

    def h(x, y, z):
        # exact 26-connected distance under Euclidean step costs: tighter
        # than the plain Euclidean lower bound, still admissible/consistent
        a, b, c = sorted((abs(x - gx), abs(y - gy), abs(z - gz)), reverse=True)
        return (a - b) + (b - c) * _SQRT2 + c * _SQRT3

    ncells = (nx + 2) * pyz
    inf = float("inf")
    g_cost = [inf] * ncells
    parent = [-1] * ncells
    closed = bytearray(ncells)
    sx, sy, sz = (s[0] + 1, s[1] + 1, s[2] + 1)
    s_flat = sx * pyz + sy * pz + sz
    goal_flat = gx * pyz + gy * pz + gz
    g_cost[s_flat] = 0.0
    start_h = h(sx, sy, sz)
    # lexicographic (f, h, flat index) tie-break for determinism
    open_heap = [(start_h, start_h, s_flat, sx, sy, sz)]
    push = heapq.heappush
    pop = heapq.heappop
    while open_heap:
        f, _, cur, cx, cy, cz = pop(open_heap)
        if closed[cur]:
            continue
        closed[cur] = 1
        if cur == goal_flat:
            cells = []
            while cur >= 0:
                x, rem = divmod(cur, pyz)
                y, z = divmod(rem, pz)
                cells.append((x - 1, y - 1, z - 1))
                cur = parent[cur]
            cells.reverse()
            return GridPath(np.array([inflated.cell_center(c) for c in cells]))
        base = g_cost[cur]
        for (dx, dy, dz), dflat, cost in moves:
            nxt = cur + dflat
            if not free[nxt] or closed[nxt]:
                continue
            cand = base + cost
            if cand < g_cost[nxt] - 1e-12:
                g_cost[nxt] = cand
                parent[nxt] = cur
                x = cx + dx
                y = cy + dy
                z = cz + dz
                hn = h(x, y, z)
                push(open_heap, (cand + hn, hn, nxt, x, y, z))
    raise NoPathError("goal unreachable in inflated grid")
