"""GJK distance / intersection queries between convex vertex sets.

Distance variant: track the simplex of Minkowski-difference support points
closest to the origin, projecting the origin onto every face of the current
simplex and keeping the minimal supporting subset.  Termination is biased
conservative: hitting the iteration cap reports an intersection, because the
planner must never certify a colliding plan as collision-free.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

MAX_ITERATIONS = 128
PROGRESS_TOL = 1e-9
CONTACT_TOL = 1e-12


@dataclass(frozen=True)
class GjkResult:
    intersects: bool
    distance: float


def _support(vertices, direction):
    return vertices[int(np.argmax(vertices @ direction))]


def _closest_on_simplex(points):
    """Closest point of conv(points) to the origin and its supporting subset.

    Enumerates affine subsets with nonnegative barycentric coordinates;
    simplices here have at most 4 points so this is cheap and robust.
    """
    best = None
    best_d2 = np.inf
    n = len(points)
    for size in range(1, n + 1):
        for idx in combinations(range(n), size):
            sub = points[list(idx)]
            if size == 1:
                proj = sub[0]
                lam = np.array([1.0])
            else:
                d = sub[1:] - sub[0]
                # origin - sub[0] = d^T t  (least squares in the affine hull)
                G = d @ d.T
                try:
                    t = np.linalg.solve(G, d @ (-sub[0]))
                except np.linalg.LinAlgError:
                    continue
                lam = np.concatenate([[1.0 - t.sum()], t])
                if np.any(lam < -1e-12):
                    continue
                proj = lam @ sub
            d2 = float(proj @ proj)
            if d2 < best_d2 - 1e-18:
                best_d2 = d2
                best = (proj, list(idx))
    return best


def gjk_query(pa, pb):
    """Distance and intersection between the hulls of two vertex sets."""
    va = np.atleast_2d(np.asarray(pa.vertices if hasattr(pa, "vertices") else pa, dtype=float))
    vb = np.atleast_2d(np.asarray(pb.vertices if hasattr(pb, "vertices") else pb, dtype=float))
    if va.shape[0] == 0 or vb.shape[0] == 0:
        raise ValueError("vertex sets must be nonempty")

    v = va[0] - vb[0]
    simplex = [v]
    for _ in range(MAX_ITERATIONS):
        proj, support_idx = _closest_on_simplex(np.array(simplex))
        v = proj
        simplex = [simplex[i] for i in support_idx]
        dist = float(np.linalg.norm(v))
        if dist * dist < CONTACT_TOL or len(simplex) == 4:
            return GjkResult(True, 0.0)
        w = _support(va, -v) - _support(vb, v)
        # support progress: no new point can get closer to the origin
        if v @ v - v @ w <= PROGRESS_TOL * max(1.0, dist):
            return GjkResult(False, dist)
        if any(np.allclose(w, s, atol=1e-14) for s in simplex):
            return GjkResult(False, dist)
        simplex.append(w)
    return GjkResult(True, 0.0)
