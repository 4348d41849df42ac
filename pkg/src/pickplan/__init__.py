"""Motion planning for an aerial pick-and-place robot: a quadcopter base
carrying a suspended parallel (Delta-style) arm.

Base and end-effector trajectories are planned separately as Bezier curves
— the base through a safe flight corridor, the end-effector through a small
QP with linear geometric-coupling constraints — and stitched into one
mission timeline with an independent play-back verifier.
"""

from .bezier import BezierSegment, PiecewiseBezier, fit_bezier, jerk_hessian
from .collision import (CollisionInterval, ObstacleMirrorSet, local_map_box,
                        pinhole_mirror, shape_polyhedron, sweep_collisions,
                        update_weights)
from .corridor import Corridor, designed_polyhedron, generate_corridor
from .delta import (DEFAULT_DELTA_PARAMS, DeltaParams, MountTransform,
                    approximate_workspace, default_mount, forward_kinematics,
                    inverse_kinematics)
from .ee_traj import (AvoidanceParams, EeLimits, EeState, GraspSpec,
                      build_ee_qp, carried_state, flat_attitude,
                      manipulation_start_time, plan_ee_segment,
                      plan_ee_trajectory)
from .errors import PlanningError, SceneError, VerificationError
from .feasibility import (RevisedWorkspace, TiltBounds, default_tilt_bounds,
                          geometric_feasibility_margin,
                          geometric_feasibility_ok, inscribed_cuboid,
                          tilted_workspace, workspace_intersection)
from .geometry import (Aabb, ConvexPolyhedronV, GridMap3D, HalfspacePolytope,
                       tilt_rotation, yaw_rotation)
from .gjk import gjk_query
from .grid_planner import astar, feasible_grasp_position, workspace_top_point
from .pipeline import (MissionTimings, PlanResult, export, load_plan,
                       plan_mission, verify_plan)
from .qp import QpProblem, QpSolution, solve_qp
from .quad_traj import QuadLimits, generate_quad_trajectory, hold_segment
from .scene import Scene, load_scene, scene_from_dict

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
