"""Mission orchestration: grasp placement, two-leg base planning, the
manipulation/hold/retraction end-effector sequence, the independent
play-back verifier, and deterministic CSV/JSON export."""

import dataclasses
import json
import time
from dataclasses import dataclass

import numpy as np

from .bezier import BezierSegment, PiecewiseBezier
from .collision import VERIFY_DT, local_map_box, sweep_collisions
from .corridor import designed_polyhedron, generate_corridor
from .delta import approximate_workspace
from .ee_traj import (AvoidanceParams, ApproachCone, EeState, GraspSpec,
                      carried_point, carried_state, manipulation_start_time,
                      plan_ee_segment, plan_ee_trajectory)
from .errors import PlanningError, QpInfeasibleError
from .feasibility import (geometric_feasibility_margin, inscribed_cuboid,
                          workspace_intersection, RevisedWorkspace)
from .geometry import Aabb, HalfspacePolytope, yaw_rotation
from .grid_planner import astar, feasible_grasp_position, workspace_top_point
from .qp import solve_qp  # noqa: F401  (re-exported for callers)
from .quad_traj import generate_quad_trajectory, hold_segment

VERIFY_SAMPLE_DT = 1e-3
ENDPOINT_TOL = 1e-6
LIMIT_TOL = 1e-6
FEASIBILITY_SLACK = 5e-3
CONTAINMENT_TOL = 1e-6
CSV_SAMPLE_DT = 1e-2


@dataclass(frozen=True)
class MissionTimings:
    t_B: float
    t_G: float
    t_grip: float
    t_A: float
    t_R: float
    horizon: float


@dataclass
class PlanResult:
    quad_traj: PiecewiseBezier
    ee_traj: PiecewiseBezier
    timings: MissionTimings
    corridor_boxes: tuple
    W_R: RevisedWorkspace
    p_B_f: np.ndarray
    designed: HalfspacePolytope
    avoidance_enabled: bool
    trace: object = None
    report: dict = None
    quad_wall_s: float = None
    ee_wall_s: float = None

    @property
    def grasp_segment(self):
        return self.ee_traj.segments[0]

    @property
    def retraction_segment(self):
        return self.ee_traj.segments[-1]


def _stage(err, name):
    if isinstance(err, PlanningError) and getattr(err, "stage", None) is None:
        err.stage = name
    return err


# Handoff pin lead times in manipulation windows: ahead of t_G on the
# arrival side and after t_A on the departure side.  Arrival pins close so
# the base still carries speed into the grasp window; when the carried
# state turns out too aggressive for the arm QP, the arrival pin is retried
# at the relaxed lead.  Departure pins far so the spin-up jerk transient
# stays clear of the retraction handoff at t_R.
PIN_OFFSET_ARRIVAL = 1.05
PIN_OFFSET_ARRIVAL_RELAXED = 1.5
PIN_OFFSET_DEPART = 2.0
# Arc length from the grasp position to the pinned path point; the relaxed
# retry shortens it along with the lead time.
PIN_DIST = 0.15
PIN_DIST_RELAXED = 0.10


def _stretch_cell(corridor, index, min_duration):
    durations = list(corridor.durations)
    durations[index] = max(durations[index], min_duration)
    return dataclasses.replace(corridor, durations=tuple(durations))


def resolve_workspace(scene):
    """Revised workspace bounds: scene override or the full construction."""
    if scene.workspace_override is not None:
        return scene.workspace_override
    rng = np.random.default_rng(scene.seed)
    W = approximate_workspace(scene.delta_params, scene.joint_limits,
                              scene.workspace_samples, scene.workspace_shrink,
                              rng=rng)
    W_I = workspace_intersection(W, scene.mount, scene.tilt_bounds)
    return inscribed_cuboid(W_I)


def plan_mission(scene, disable_ee_avoidance=False):
    """End-to-end planning for one pick-and-place mission."""
    try:
        W_R = resolve_workspace(scene)
        p_B_f = feasible_grasp_position(scene.p_O, scene.psi_O, W_R)
        p_top = workspace_top_point(W_R)
    except PlanningError as err:
        raise _stage(err, "workspace")

    t_quad0 = time.perf_counter()
    try:
        path1 = astar(scene.grid, scene.p_start, p_B_f, scene.r_S)
        path2 = astar(scene.grid, p_B_f, scene.p_end, scene.r_S)
    except PlanningError as err:
        raise _stage(err, "grid_search")
    try:
        cor1 = generate_corridor(scene.grid, path1, scene.r_S,
                                 scene.quad_limits.v_max, scene.quad_limits.a_max)
        cor2 = generate_corridor(scene.grid, path2, scene.r_S,
                                 scene.quad_limits.v_max, scene.quad_limits.a_max)
    except PlanningError as err:
        raise _stage(err, "corridor")
    designed = designed_polyhedron(p_B_f, scene.psi_O, W_R)

    def _handoff_pin(path, box, reverse, cap=PIN_DIST):
        """Path point a fixed arc length out from the grasp position.

        Pinning this point a set lead time away from the manipulation
        window keeps the base moving through the handoff instead of
        crawling to a stop early; the distance is capped so the pinned
        approach stays brakeable inside one manipulation window.
        """
        wps = [np.asarray(w, dtype=float) for w in path.waypoints]
        if reverse:
            wps = wps[::-1]
        wps = [p_B_f] + wps
        arc = 0.0
        prev = wps[0]
        point = None
        for nxt in wps[1:]:
            seg = float(np.linalg.norm(nxt - prev))
            if seg <= 1e-12:
                continue
            if arc + seg >= cap:
                point = prev + (cap - arc) / seg * (nxt - prev)
                break
            arc += seg
            prev = nxt
        if point is None or float(np.linalg.norm(point - p_B_f)) < 0.02:
            return None
        return np.clip(point, box.lo + 1e-9, box.hi - 1e-9)

    # Make sure the arrival and departure cells last at least one
    # manipulation window, so the grasp and retraction segments each fit
    # inside a single corridor cell.  The base keeps moving through the
    # window; the arm segments absorb the carried motion.
    window = 2.0 * scene.ee_limits.v_max / scene.ee_limits.a_max
    # The handoff pin sits a fraction of a window outside the manipulation
    # window so the braking arc's jerk transient settles before the arm
    # takes over its carried state.
    pin_depart = PIN_OFFSET_DEPART * window
    cor2 = _stretch_cell(cor2, 0, pin_depart)
    exit_ = _handoff_pin(path2, cor2.boxes[0], reverse=False)

    params = AvoidanceParams(scene.r_S, scene.l_C, scene.l_s, scene.alpha,
                             scene.sweep_dt)
    quad_wall = time.perf_counter() - t_quad0
    ee_wall = 0.0
    for attempt, (offset_w, dist) in enumerate(
            ((PIN_OFFSET_ARRIVAL, PIN_DIST),
             (PIN_OFFSET_ARRIVAL_RELAXED, PIN_DIST_RELAXED))):
        pin_arrive = offset_w * window
        cor1a = _stretch_cell(cor1, -1, pin_arrive)
        entry = _handoff_pin(path1, cor1a.boxes[-1], reverse=True, cap=dist)
        t_quad0 = time.perf_counter()
        try:
            leg1 = generate_quad_trajectory(cor1a, scene.p_start, p_B_f,
                                            scene.quad_limits, scene.quad_degree,
                                            t_start=0.0,
                                            pin=None if entry is None else (pin_arrive, entry, "end"))
            t_G = leg1.t1
            t_A = t_G + scene.t_grip
            hold_b = hold_segment(p_B_f, t_G, scene.t_grip, scene.quad_degree)
            leg2 = generate_quad_trajectory(cor2, p_B_f, scene.p_end,
                                            scene.quad_limits, scene.quad_degree,
                                            t_start=t_A,
                                            pin=None if exit_ is None else (pin_depart, exit_, "start"))
        except PlanningError as err:
            quad_wall += time.perf_counter() - t_quad0
            if attempt == 0:
                continue
            raise _stage(err, "quad_trajectory")
        quad_traj = PiecewiseBezier(leg1.segments + (hold_b,) + leg2.segments)
        quad_wall += time.perf_counter() - t_quad0

        t_ee0 = time.perf_counter()
        grasp = GraspSpec(scene.p_O, scene.psi_O, scene.t_grip, t_G,
                          scene.cone_angle, scene.cone_time_fraction)
        try:
            t_B = manipulation_start_time(t_G, scene.ee_limits)
            seg_grasp, trace, _ = plan_ee_trajectory(
                quad_traj, grasp, W_R, scene.ee_limits, scene.obstacles,
                scene.mount, params, avoidance=not disable_ee_avoidance,
                degree=scene.ee_degree)
            win = t_G - t_B
            t_R = t_A + win
            if t_R > quad_traj.t1:
                raise PlanningError(
                    f"second leg shorter than the {win}s retraction window")
            hold_e = hold_segment(scene.p_O, t_G, scene.t_grip, scene.ee_degree)
            terminal = carried_state(quad_traj, t_R, p_top, scene.psi_O)
            box_r = local_map_box(quad_traj.position(t_R), scene.p_O, scene.l_s)
            seg_ret, trace, _ = plan_ee_segment(
                quad_traj, t_A, t_R, EeState.rest(scene.p_O), terminal,
                scene.psi_O, W_R, scene.ee_limits, scene.obstacles, scene.mount,
                params, box_r, cone=None, avoidance=not disable_ee_avoidance,
                degree=scene.ee_degree, trace=trace)
        except QpInfeasibleError as err:
            ee_wall += time.perf_counter() - t_ee0
            if attempt == 0:
                continue
            raise _stage(err, "ee_trajectory")
        except PlanningError as err:
            raise _stage(err, "ee_trajectory")
        ee_wall += time.perf_counter() - t_ee0
        break
    ee_traj = PiecewiseBezier((seg_grasp, hold_e, seg_ret))

    timings = MissionTimings(float(t_B), float(t_G), float(scene.t_grip),
                             float(t_A), float(t_R), float(quad_traj.t1))
    result = PlanResult(quad_traj, ee_traj, timings,
                        (cor1.boxes, cor2.boxes), W_R, p_B_f, designed,
                        not disable_ee_avoidance, trace=trace,
                        quad_wall_s=quad_wall, ee_wall_s=ee_wall)
    result.report = verify_plan(result, scene)
    return result


def _sample_times(t0, t1, dt):
    n = int(np.ceil((t1 - t0) / dt - 1e-12))
    ts = t0 + dt * np.arange(n + 1)
    ts[-1] = t1
    return ts


def _check(checks, name, margin, passed=None, detail=""):
    if passed is None:
        passed = bool(margin >= 0.0)
    checks.append({"name": name, "passed": bool(passed),
                   "margin": float(margin), "detail": detail})


def _limit_margins(traj, t0, t1, v_max, a_max):
    ts = _sample_times(t0, t1, VERIFY_SAMPLE_DT)
    vmax = amax = 0.0
    for t in ts:
        _, v, a, _ = traj.eval(t)
        vmax = max(vmax, np.max(np.abs(v)))
        amax = max(amax, np.max(np.abs(a)))
    return v_max + LIMIT_TOL - vmax, a_max + LIMIT_TOL - amax


def _union_margin(points, boxes):
    """Worst-case slack of each point against the union of boxes."""
    per_box = []
    for b in boxes:
        slack = np.minimum(points - b.lo, b.hi - points).min(axis=1)
        per_box.append(slack)
    return float(np.max(np.stack(per_box), axis=0).min())


def verify_plan(result, scene):
    """Independent play-back checks; returns the report dictionary."""
    checks = []
    tm = result.timings
    quad = result.quad_traj
    ee = result.ee_traj

    _check(checks, "base_start_endpoint",
           ENDPOINT_TOL - np.linalg.norm(quad.position(0.0) - scene.p_start),
           detail="|p_B(0) - p_start| within 1e-6 m")
    _check(checks, "base_end_endpoint",
           ENDPOINT_TOL - np.linalg.norm(quad.position(tm.horizon) - scene.p_end),
           detail="|p_B(T) - p_end| within 1e-6 m")

    mv, ma = _limit_margins(quad, 0.0, tm.horizon, scene.quad_limits.v_max,
                            scene.quad_limits.a_max)
    _check(checks, "base_velocity_limit", mv)
    _check(checks, "base_acceleration_limit", ma)
    mv, ma = _limit_margins(ee, tm.t_B, tm.t_R, scene.ee_limits.v_max,
                            scene.ee_limits.a_max)
    _check(checks, "ee_velocity_limit", mv)
    _check(checks, "ee_acceleration_limit", ma)

    ts = _sample_times(tm.t_B, tm.t_R, VERIFY_SAMPLE_DT)
    geo = min(geometric_feasibility_margin(ee.position(t), quad.position(t),
                                           scene.psi_O, result.W_R)
              for t in ts)
    _check(checks, "geometric_feasibility", geo,
           passed=geo >= -FEASIBILITY_SLACK,
           detail="1 kHz sweep of the workspace-box constraint, 5 mm slack")

    t_C = tm.t_B + scene.cone_time_fraction * (tm.t_G - tm.t_B)
    p_C = ee.position(t_C)
    cone = (np.tan(scene.cone_angle) * (scene.p_O[2] - p_C[2])
            - max(abs(p_C[0] - scene.p_O[0]), abs(p_C[1] - scene.p_O[1])))
    _check(checks, "approach_cone", cone + LIMIT_TOL,
           detail="approach direction at t_C inside the grasp cone")

    boxes1, boxes2 = result.corridor_boxes
    pts1 = np.array([quad.position(t) for t in _sample_times(0.0, tm.t_G, VERIFY_SAMPLE_DT)])
    pts2 = np.array([quad.position(t) for t in _sample_times(tm.t_A, tm.horizon, VERIFY_SAMPLE_DT)])
    _check(checks, "corridor_containment",
           min(_union_margin(pts1, boxes1), _union_margin(pts2, boxes2))
           + CONTAINMENT_TOL,
           detail="base inside the union of its leg's corridor cells")

    hold_base = max(np.linalg.norm(quad.position(t) - result.p_B_f)
                    for t in _sample_times(tm.t_G, tm.t_A, VERIFY_SAMPLE_DT))
    _check(checks, "base_hold_stationary", ENDPOINT_TOL - hold_base)

    _check(checks, "designed_cell_covers_object",
           -result.designed.margin(scene.p_O),
           detail="grasp-stage cell contains the object position")
    handoff = result.designed.stacked(HalfspacePolytope.from_aabb(boxes1[-1]))
    try:
        handoff.interior_point()
        _check(checks, "designed_cell_handoff", 0.0, passed=True,
               detail="grasp-stage cell overlaps the last corridor cell")
    except PlanningError:
        _check(checks, "designed_cell_handoff", -1.0, passed=False,
               detail="grasp-stage cell misses the last corridor cell")

    hold_err = max(np.linalg.norm(ee.position(t) - scene.p_O)
                   for t in _sample_times(tm.t_G, tm.t_A, VERIFY_SAMPLE_DT))
    _check(checks, "grasp_hold_contract", ENDPOINT_TOL - hold_err,
           detail="p_E constant at p_O during the gripper hold")

    p_top = workspace_top_point(result.W_R)
    attach = max(
        np.linalg.norm(ee.position(tm.t_B)
                       - carried_point(quad, tm.t_B, p_top, scene.psi_O)),
        np.linalg.norm(ee.position(tm.t_R)
                       - carried_point(quad, tm.t_R, p_top, scene.psi_O)))
    _check(checks, "ee_attach_continuity", ENDPOINT_TOL - attach,
           detail="end-effector meets its carried rest point at t_B and t_R")

    total_s = 0.0
    total_m = 0.0
    n_intervals = 0
    for seg in (result.grasp_segment, result.retraction_segment):
        box = local_map_box(quad.position(seg.t0 if seg is result.grasp_segment
                                          else seg.t1), scene.p_O, scene.l_s)
        ivs = sweep_collisions(seg, quad, scene.psi_O, scene.mount, scene.r_S,
                               scene.l_C, scene.obstacles, box, VERIFY_DT)
        n_intervals += len(ivs)
        total_s += sum(iv.length() for iv in ivs)
        total_m += sum(float(np.linalg.norm(iv.T_R - iv.T_L)) for iv in ivs)
    _check(checks, "collision_free", -total_s, passed=n_intervals == 0,
           detail="0.5 ms collision sweep of both manipulation segments")

    status = "PASS" if all(c["passed"] for c in checks) else "FAIL"
    report = {
        "status": status,
        "checks": checks,
        "timings_s": {
            "t_B": float(tm.t_B), "t_G": float(tm.t_G),
            "t_grip": float(tm.t_grip), "t_hold_end": float(tm.t_A),
            "t_R": float(tm.t_R), "horizon": float(tm.horizon),
        },
        "ee_iterations": (result.trace.iterations if result.trace else None),
        "collision_interval_total_s": float(total_s),
        "collision_interval_length_m": float(total_m),
        "avoidance_enabled": result.avoidance_enabled,
        "seed": scene.seed,
    }
    return report


def _carried_kinematics(quad, t, p_top, psi, horizon, delta=1e-3):
    tc = min(max(t, delta), horizon - delta)
    pm = carried_point(quad, tc - delta, p_top, psi)
    p0 = carried_point(quad, tc, p_top, psi)
    pp = carried_point(quad, tc + delta, p_top, psi)
    v = (pp - pm) / (2 * delta)
    a = (pp - 2 * p0 + pm) / delta**2
    return carried_point(quad, t, p_top, psi), v, a


def _base_stage(t, tm):
    return "hold" if tm.t_G <= t < tm.t_A else "moving"


def _ee_stage(t, tm):
    if t < tm.t_B or t >= tm.t_R:
        return "carried"
    if t < tm.t_G:
        return "manipulation"
    if t < tm.t_A:
        return "hold"
    return "retraction"


def _fmt(x):
    return f"{x:.9f}"


def write_csv(result, scene, path, sample_dt=CSV_SAMPLE_DT, stage="all"):
    """Sampled trajectory table; byte-stable for a fixed scene and seed."""
    tm = result.timings
    quad = result.quad_traj
    ee = result.ee_traj
    p_top = workspace_top_point(result.W_R)
    times = _sample_times(0.0, tm.horizon, sample_dt)
    lines = ["t_s,body,px,py,pz,vx,vy,vz,ax,ay,az,stage"]
    for t in times:
        if stage in ("all", "moving"):
            p, v, a, _ = quad.eval(t)
            lines.append(",".join([_fmt(t), "base", *map(_fmt, p),
                                   *map(_fmt, v), *map(_fmt, a),
                                   _base_stage(t, tm)]))
        if stage in ("all", "manipulation"):
            if tm.t_B <= t <= tm.t_R:
                p, v, a, _ = ee.eval(t)
            else:
                p, v, a = _carried_kinematics(quad, t, p_top, scene.psi_O,
                                              tm.horizon)
            lines.append(",".join([_fmt(t), "ee", *map(_fmt, p),
                                   *map(_fmt, v), *map(_fmt, a),
                                   _ee_stage(t, tm)]))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _segment_doc(seg):
    return {"t0": seg.t0, "t1": seg.t1,
            "control_points": seg.control_points.tolist()}


def _plan_doc(result, scene):
    tm = result.timings
    return {
        "quad_segments": [_segment_doc(s) for s in result.quad_traj.segments],
        "ee_segments": [_segment_doc(s) for s in result.ee_traj.segments],
        "timings_s": {"t_B": tm.t_B, "t_G": tm.t_G, "t_grip": tm.t_grip,
                      "t_A": tm.t_A, "t_R": tm.t_R, "horizon": tm.horizon},
        "corridor_boxes": [[{"lo": b.lo.tolist(), "hi": b.hi.tolist()}
                            for b in leg] for leg in result.corridor_boxes],
        "w_min": result.W_R.w_min.tolist(),
        "w_max": result.W_R.w_max.tolist(),
        "p_B_f": result.p_B_f.tolist(),
        "avoidance_enabled": result.avoidance_enabled,
        "seed": scene.seed,
    }


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def export(result, scene, out_dir, sample_dt=CSV_SAMPLE_DT, stage="all"):
    """Write trajectory.csv, report.json, and plan.json into out_dir."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    write_csv(result, scene, os.path.join(out_dir, "trajectory.csv"),
              sample_dt, stage)
    _dump_json(result.report, os.path.join(out_dir, "report.json"))
    _dump_json(_plan_doc(result, scene), os.path.join(out_dir, "plan.json"))


def load_plan(plan_dir, scene):
    """Rebuild a PlanResult from an exported plan directory."""
    import os

    with open(os.path.join(plan_dir, "plan.json")) as fh:
        doc = json.load(fh)
    quad = PiecewiseBezier(tuple(
        BezierSegment(np.array(s["control_points"]), s["t0"], s["t1"])
        for s in doc["quad_segments"]))
    ee = PiecewiseBezier(tuple(
        BezierSegment(np.array(s["control_points"]), s["t0"], s["t1"])
        for s in doc["ee_segments"]))
    t = doc["timings_s"]
    timings = MissionTimings(t["t_B"], t["t_G"], t["t_grip"], t["t_A"],
                             t["t_R"], t["horizon"])
    boxes = tuple(tuple(Aabb(np.array(b["lo"]), np.array(b["hi"]))
                        for b in leg) for leg in doc["corridor_boxes"])
    W_R = RevisedWorkspace(np.array(doc["w_min"]), np.array(doc["w_max"]))
    p_B_f = np.array(doc["p_B_f"])
    designed = designed_polyhedron(p_B_f, scene.psi_O, W_R)
    return PlanResult(quad, ee, timings, boxes, W_R, p_B_f, designed,
                      doc["avoidance_enabled"])
