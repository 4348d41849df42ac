"""Corridor-confined piecewise Bezier trajectory for the quadcopter base.

One degree-n segment per corridor cell; minimum squared jerk subject to
control points in their cell (convex-hull safety), per-axis derivative
control-point limits, C2 joints, and rest-to-rest endpoints.  Constraints
are axis-separable, so three small QPs are solved per leg.
"""

from dataclasses import dataclass

import numpy as np

from .bezier import BezierSegment, PiecewiseBezier, jerk_hessian
from .errors import QpInfeasibleError, MaxIterationsError
from .qp import QpProblem, solve_qp

DEGREE = 7
RETRY_SCALE = 1.5
MAX_RETRIES = 3


@dataclass(frozen=True)
class QuadLimits:
    v_max: float
    a_max: float

    def __post_init__(self):
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("limits must be positive")


def _axis_qp(durations, lo, hi, p0, p1, degree):
    """QP matrices for one axis over all segments."""
    n = degree
    ncp = n + 1
    m = len(durations)
    nv = m * ncp
    Q = np.zeros((nv, nv))
    for i, s in enumerate(durations):
        Q[i * ncp:(i + 1) * ncp, i * ncp:(i + 1) * ncp] = jerk_hessian(n, s)

    eq_rows, eq_rhs = [], []

    def row(seg, coeffs):
        r = np.zeros(nv)
        for idx, val in coeffs:
            r[seg * ncp + idx] = val
        return r

    s0, sm = durations[0], durations[-1]
    eq_rows += [row(0, [(0, 1.0)])]
    eq_rhs += [p0]
    eq_rows += [row(0, [(1, n / s0), (0, -n / s0)])]
    eq_rhs += [0.0]
    eq_rows += [row(0, [(2, n * (n - 1) / s0**2), (1, -2 * n * (n - 1) / s0**2), (0, n * (n - 1) / s0**2)])]
    eq_rhs += [0.0]
    eq_rows += [row(m - 1, [(n, 1.0)])]
    eq_rhs += [p1]
    eq_rows += [row(m - 1, [(n, n / sm), (n - 1, -n / sm)])]
    eq_rhs += [0.0]
    eq_rows += [row(m - 1, [(n, n * (n - 1) / sm**2), (n - 1, -2 * n * (n - 1) / sm**2), (n - 2, n * (n - 1) / sm**2)])]
    eq_rhs += [0.0]
    for j in range(m - 1):
        sa, sb = durations[j], durations[j + 1]
        eq_rows += [row(j, [(n, 1.0)]) - row(j + 1, [(0, 1.0)])]
        eq_rhs += [0.0]
        eq_rows += [row(j, [(n, n / sa), (n - 1, -n / sa)]) - row(j + 1, [(1, n / sb), (0, -n / sb)])]
        eq_rhs += [0.0]
        ca = n * (n - 1) / sa**2
        cb = n * (n - 1) / sb**2
        eq_rows += [
            row(j, [(n, ca), (n - 1, -2 * ca), (n - 2, ca)])
            - row(j + 1, [(2, cb), (1, -2 * cb), (0, cb)])
        ]
        eq_rhs += [0.0]

    ie_rows, ie_rhs = [], []
    for j, s in enumerate(durations):
        for i in range(ncp):
            ie_rows += [row(j, [(i, 1.0)]), row(j, [(i, -1.0)])]
            ie_rhs += [hi[j], -lo[j]]
    return Q, np.array(eq_rows), np.array(eq_rhs), ie_rows, ie_rhs


def _add_derivative_bounds(ie_rows, ie_rhs, durations, degree, v_max, a_max):
    n = degree
    ncp = n + 1
    m = len(durations)
    nv = m * ncp
    for j, s in enumerate(durations):
        for i in range(n):
            r = np.zeros(nv)
            r[j * ncp + i + 1] = n / s
            r[j * ncp + i] = -n / s
            ie_rows += [r, -r]
            ie_rhs += [v_max, v_max]
        for i in range(n - 1):
            r = np.zeros(nv)
            c = n * (n - 1) / s**2
            r[j * ncp + i + 2] = c
            r[j * ncp + i + 1] = -2 * c
            r[j * ncp + i] = c
            ie_rows += [r, -r]
            ie_rhs += [a_max, a_max]


def generate_quad_trajectory(corridor, p_start, p_goal, limits, degree=DEGREE, t_start=0.0,
                             pin=None):
    """Plan one leg through the corridor; retries stretch durations 1.5x.

    `pin`, when given, is `(offset_s, point, anchor)` with anchor "start" or
    "end": a position equality `offset_s` after the leg starts (or before it
    ends).  It pins the handoff into or out of the grasp-stage cell so the
    base is genuinely in motion while the arm deploys.
    """
    if not corridor.boxes[0].contains(p_start, tol=1e-9):
        raise QpInfeasibleError("start position outside the first corridor cell")
    if not corridor.boxes[-1].contains(p_goal, tol=1e-9):
        raise QpInfeasibleError("goal position outside the last corridor cell")

    durations = np.array(corridor.durations, dtype=float)
    last_err = None
    for _ in range(MAX_RETRIES + 1):
        try:
            return _solve_leg(corridor, p_start, p_goal, limits, degree, t_start, durations,
                              pin)
        except (QpInfeasibleError, MaxIterationsError) as err:
            last_err = err
            durations = durations * RETRY_SCALE
    raise QpInfeasibleError(f"quad trajectory infeasible after retries: {last_err}")


def _split_at_pin(boxes, durations, pin):
    """Insert a segment boundary at the pin time within its corridor cell.

    Returns expanded boxes/durations and the index of the segment whose end
    control point carries the position equality.
    """
    offset, point, anchor = pin
    boxes = list(boxes)
    durs = list(durations)
    total = float(sum(durs))
    t_rel = offset if anchor == "start" else total - offset
    t_rel = min(max(t_rel, 1e-3), total - 1e-3)
    bounds = np.concatenate([[0.0], np.cumsum(durs)])
    seg = int(np.searchsorted(bounds[1:-1], t_rel, side="right"))
    local = t_rel - bounds[seg]
    if local < 1e-6:
        return boxes, durs, seg - 1, np.asarray(point, dtype=float)
    if durs[seg] - local < 1e-6:
        return boxes, durs, seg, np.asarray(point, dtype=float)
    durs[seg:seg + 1] = [local, durs[seg] - local]
    boxes.insert(seg, boxes[seg])
    return boxes, durs, seg, np.asarray(point, dtype=float)


MAX_SEGMENT_S = 2.0


def _subdivide_long(boxes, durations, pin_seg):
    """Split segments longer than MAX_SEGMENT_S into equal parts.

    A single low-degree segment spanning many seconds cannot represent a
    cruise followed by a braking arc; finer segments restore that freedom.
    """
    out_boxes, out_durs = [], []
    new_pin = pin_seg
    for i, (b, d) in enumerate(zip(boxes, durations)):
        parts = max(1, int(np.ceil(d / MAX_SEGMENT_S)))
        out_boxes += [b] * parts
        out_durs += [d / parts] * parts
        if pin_seg is not None and i == pin_seg:
            new_pin = len(out_durs) - 1
    return out_boxes, out_durs, new_pin


def _solve_leg(corridor, p_start, p_goal, limits, degree, t_start, durations, pin=None):
    ncp = degree + 1
    boxes = list(corridor.boxes)
    durations = list(durations)
    pin_seg = pin_point = None
    if pin is not None:
        boxes, durations, pin_seg, pin_point = _split_at_pin(boxes, durations, pin)
    boxes, durations, pin_seg = _subdivide_long(boxes, durations, pin_seg)
    m = len(durations)
    axis_cps = []
    for ax in range(3):
        lo = [b.lo[ax] for b in boxes]
        hi = [b.hi[ax] for b in boxes]
        Q, A_eq, b_eq, ie_rows, ie_rhs = _axis_qp(durations, lo, hi, p_start[ax], p_goal[ax], degree)
        if pin_seg is not None:
            row = np.zeros(m * ncp)
            row[pin_seg * ncp + degree] = 1.0
            A_eq = np.vstack([A_eq, row])
            b_eq = np.append(b_eq, pin_point[ax])
        _add_derivative_bounds(ie_rows, ie_rhs, durations, degree, limits.v_max, limits.a_max)
        sol = solve_qp(QpProblem(Q, np.zeros(Q.shape[0]), A_eq, b_eq, np.array(ie_rows), np.array(ie_rhs)))
        axis_cps.append(sol.x.reshape(m, ncp))
    segments = []
    t = t_start
    for j in range(m):
        cps = np.stack([axis_cps[0][j], axis_cps[1][j], axis_cps[2][j]], axis=1)
        segments.append(BezierSegment(cps, t, t + durations[j]))
        t += durations[j]
    return PiecewiseBezier(tuple(segments))


def hold_segment(p, t0, duration, degree=DEGREE):
    """Constant segment pinned at p for the gripper-closing hold."""
    cps = np.tile(np.asarray(p, dtype=float), (degree + 1, 1))
    return BezierSegment(cps, t0, t0 + duration)
