"""Scene file loading and validation.

Scenes are JSON documents with units baked into field names (meters,
seconds, radians).  The occupancy grid is given either as a nested boolean
array or as a list of occupied axis-aligned boxes rasterized at load time.
Obstacles used by the end-effector collision sweep are listed separately as
convex vertex sets or boxes; boxes that should also block the flight
corridor must additionally appear in the grid.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .collision import SWEEP_DT
from .delta import (DEFAULT_DELTA_PARAMS, DEFAULT_JOINT_LIMITS,
                    WORKSPACE_SHRINK, DeltaParams, MountTransform,
                    default_mount)
from .ee_traj import EeLimits
from .errors import SceneError
from .feasibility import RevisedWorkspace, TiltBounds, default_tilt_bounds
from .geometry import Aabb, ConvexPolyhedronV, GridMap3D
from .quad_traj import QuadLimits


@dataclass(frozen=True)
class Scene:
    """Validated, immutable mission description."""

    grid: GridMap3D
    obstacles: dict
    p_start: np.ndarray
    p_end: np.ndarray
    p_O: np.ndarray
    psi_O: float
    t_grip: float
    quad_limits: QuadLimits
    ee_limits: EeLimits
    delta_params: DeltaParams
    joint_limits: tuple
    mount: MountTransform
    tilt_bounds: TiltBounds
    workspace_override: RevisedWorkspace | None
    r_S: float
    l_C: float
    l_s: float
    alpha: float
    cone_angle: float
    cone_time_fraction: float
    quad_degree: int
    ee_degree: int
    workspace_samples: int
    workspace_shrink: float
    sweep_dt: float
    seed: int
    raw: dict = field(repr=False, default_factory=dict)


def _vec3(doc, key, required=True, default=None):
    if key not in doc:
        if required:
            raise SceneError(f"missing field {key!r}")
        return None if default is None else np.asarray(default, dtype=float)
    v = np.asarray(doc[key], dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise SceneError(f"{key!r} must be a finite 3-vector")
    return v


def _positive(doc, key, default):
    x = float(doc.get(key, default))
    if not np.isfinite(x) or x <= 0:
        raise SceneError(f"{key!r} must be a positive number")
    return x


def _nonnegative(doc, key, default):
    x = float(doc.get(key, default))
    if not np.isfinite(x) or x < 0:
        raise SceneError(f"{key!r} must be a nonnegative number")
    return x


def _load_grid(doc):
    try:
        g = doc["grid"]
        origin = np.asarray(g["origin_m"], dtype=float)
        cell = float(g["cell_size_m"])
    except KeyError as exc:
        raise SceneError(f"grid is missing field {exc}") from exc
    if cell <= 0:
        raise SceneError("grid cell_size_m must be positive")
    if "occupancy" in g:
        occ = np.asarray(g["occupancy"], dtype=bool)
        if occ.ndim != 3:
            raise SceneError("grid occupancy must be a 3-d boolean array")
    elif "size_cells" in g:
        dims = tuple(int(n) for n in g["size_cells"])
        if len(dims) != 3 or any(n <= 0 for n in dims):
            raise SceneError("grid size_cells must be three positive integers")
        occ = np.zeros(dims, dtype=bool)
        for box in g.get("occupied_boxes_m", []):
            lo = np.asarray(box["lo"], dtype=float)
            hi = np.asarray(box["hi"], dtype=float)
            if np.any(hi < lo):
                raise SceneError("occupied box has hi < lo")
            c0 = np.floor((lo - origin) / cell).astype(int)
            c1 = np.ceil((hi - origin) / cell).astype(int)
            c0 = np.clip(c0, 0, np.array(dims))
            c1 = np.clip(c1, 0, np.array(dims))
            occ[c0[0]:c1[0], c0[1]:c1[1], c0[2]:c1[2]] = True
    else:
        raise SceneError("grid needs either 'occupancy' or 'size_cells'")
    return GridMap3D(origin, cell, occ)


def _load_obstacles(doc):
    obstacles = {}
    for i, entry in enumerate(doc.get("obstacles", [])):
        name = str(entry.get("id", f"obstacle_{i}"))
        if name in obstacles:
            raise SceneError(f"duplicate obstacle id {name!r}")
        if "vertices_m" in entry:
            verts = np.asarray(entry["vertices_m"], dtype=float)
            if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 1:
                raise SceneError(f"obstacle {name!r} vertices must be (k, 3)")
            obstacles[name] = ConvexPolyhedronV(verts)
        elif "box_m" in entry:
            lo = np.asarray(entry["box_m"]["lo"], dtype=float)
            hi = np.asarray(entry["box_m"]["hi"], dtype=float)
            if np.any(hi < lo):
                raise SceneError(f"obstacle {name!r} box has hi < lo")
            obstacles[name] = Aabb(lo, hi).vertices()
        else:
            raise SceneError(f"obstacle {name!r} needs 'vertices_m' or 'box_m'")
    return obstacles


def load_scene(path, seed=None):
    """Load and validate a scene file; seed overrides the file's value."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SceneError(f"cannot read scene file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SceneError("scene document must be a JSON object")
    return scene_from_dict(doc, seed=seed)


def scene_from_dict(doc, seed=None):
    grid = _load_grid(doc)
    obstacles = _load_obstacles(doc)
    p_start = _vec3(doc, "p_start_m")
    p_end = _vec3(doc, "p_end_m")
    p_O = _vec3(doc, "p_O_m")
    for key, p in (("p_start_m", p_start), ("p_end_m", p_end), ("p_O_m", p_O)):
        hi = grid.origin + np.array(grid.dims) * grid.cell_size
        if np.any(p < grid.origin) or np.any(p > hi):
            raise SceneError(f"{key!r} lies outside the grid bounds")

    d = doc.get("delta", {})
    try:
        params = DeltaParams(
            l_U=float(d.get("l_U_m", DEFAULT_DELTA_PARAMS.l_U)),
            l_L=float(d.get("l_L_m", DEFAULT_DELTA_PARAMS.l_L)),
            r_F=float(d.get("r_F_m", DEFAULT_DELTA_PARAMS.r_F)),
            r_M=float(d.get("r_M_m", DEFAULT_DELTA_PARAMS.r_M)),
            l_g=float(d.get("l_g_m", DEFAULT_DELTA_PARAMS.l_g)),
        )
    except ValueError as exc:
        raise SceneError(f"invalid arm geometry: {exc}") from exc

    jl = doc.get("joint_limits_rad", list(DEFAULT_JOINT_LIMITS))
    if len(jl) != 2 or not jl[0] < jl[1]:
        raise SceneError("joint_limits_rad must be [lo, hi] with lo < hi")
    joint_limits = (float(jl[0]), float(jl[1]))

    m = doc.get("mount", {})
    base = default_mount()
    mount = MountTransform(base.R_D_B,
                           _vec3(m, "p_C_B_m", required=False,
                                 default=base.p_C_B))

    tb = doc.get("tilt_bounds_rad")
    if tb is None:
        tilt_bounds = default_tilt_bounds()
    else:
        try:
            tilt_bounds = TiltBounds(float(tb["theta_min"]),
                                     float(tb["theta_max"]),
                                     float(tb["phi_min"]),
                                     float(tb["phi_max"]))
        except (KeyError, ValueError) as exc:
            raise SceneError(f"invalid tilt bounds: {exc}") from exc

    override = None
    if "w_min_m" in doc or "w_max_m" in doc:
        w_min = _vec3(doc, "w_min_m")
        w_max = _vec3(doc, "w_max_m")
        if np.any(w_min >= w_max):
            raise SceneError("w_min_m must be strictly below w_max_m")
        override = RevisedWorkspace(w_min, w_max)

    psi_O = float(doc.get("psi_O_rad", 0.0))
    if not np.isfinite(psi_O):
        raise SceneError("psi_O_rad must be finite")

    seed_val = int(doc.get("seed", 0)) if seed is None else int(seed)
    if seed_val < 0:
        raise SceneError("seed must be a nonnegative integer")

    try:
        quad_limits = QuadLimits(_positive(doc, "quad_v_max_mps", 0.5),
                                 _positive(doc, "quad_a_max_mps2", 1.0))
        ee_limits = EeLimits(_positive(doc, "ee_v_max_mps", 0.5),
                             _positive(doc, "ee_a_max_mps2", 2.0))
    except ValueError as exc:
        raise SceneError(str(exc)) from exc

    return Scene(
        grid=grid,
        obstacles=obstacles,
        p_start=p_start,
        p_end=p_end,
        p_O=p_O,
        psi_O=psi_O,
        t_grip=_positive(doc, "t_grip_s", 1.0),
        quad_limits=quad_limits,
        ee_limits=ee_limits,
        delta_params=params,
        joint_limits=joint_limits,
        mount=mount,
        tilt_bounds=tilt_bounds,
        workspace_override=override,
        r_S=_positive(doc, "r_S_m", 0.50),
        l_C=_positive(doc, "l_C_m", 0.06),
        l_s=_nonnegative(doc, "l_s_m", 0.20),
        alpha=_positive(doc, "alpha", 3.0),
        cone_angle=_positive(doc, "cone_angle_rad", float(np.deg2rad(15.0))),
        cone_time_fraction=_positive(doc, "cone_time_fraction", 0.8),
        quad_degree=int(doc.get("quad_degree", 7)),
        # degree-7 derivative control-point boxes cannot span the workspace
        # half-height inside the fixed grasp window; 17 leaves real headroom
        ee_degree=int(doc.get("ee_degree", 17)),
        workspace_samples=int(doc.get("workspace_samples", 4096)),
        workspace_shrink=_nonnegative(doc, "workspace_shrink_m",
                                      WORKSPACE_SHRINK),
        sweep_dt=_positive(doc, "sweep_dt_s", SWEEP_DT),
        seed=seed_val,
        raw=doc,
    )
