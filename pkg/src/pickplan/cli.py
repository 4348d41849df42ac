"""Command-line interface: plan one mission, or re-verify an exported plan."""

import argparse
import logging
import os
import sys

from .errors import PlanningError, SceneError, VerificationError
from .pipeline import CSV_SAMPLE_DT, export, load_plan, plan_mission, verify_plan
from .scene import load_scene

EXIT_PASS = 0
EXIT_PLANNING = 2
EXIT_VERIFICATION = 3
EXIT_SCENE = 4

log = logging.getLogger("pickplan")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pickplan",
        description="Aerial pick-and-place motion planner (quadcopter base "
                    "with a suspended parallel arm).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a mission and export trajectories")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--disable-ee-avoidance", action="store_true",
                   help="skip the iterative collision-avoidance loop")
    p.add_argument("--sample-dt", type=float, default=CSV_SAMPLE_DT,
                   metavar="S", help="CSV sampling period in seconds")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scene's random seed")
    p.add_argument("--stage", choices=("moving", "manipulation", "all"),
                   default="all", help="which body rows to export")

    v = sub.add_parser("verify", help="re-verify an exported plan")
    v.add_argument("--plan", required=True, help="plan output directory")
    v.add_argument("--scene", required=True, help="scene JSON file")
    return parser


def _configure_logging():
    level = os.environ.get("PLANNER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _cmd_plan(args):
    try:
        scene = load_scene(args.scene, seed=args.seed)
    except SceneError as err:
        log.error("scene error: %s", err)
        print(f"scene error: {err}", file=sys.stderr)
        return EXIT_SCENE
    try:
        result = plan_mission(scene,
                              disable_ee_avoidance=args.disable_ee_avoidance)
    except PlanningError as err:
        stage = getattr(err, "stage", None) or "planning"
        log.error("planning failed at stage %s: %s", stage, err)
        print(f"planning failed [{stage}]: {err}", file=sys.stderr)
        return EXIT_PLANNING
    export(result, scene, args.out, args.sample_dt, args.stage)
    status = result.report["status"]
    print(f"{status}: wrote plan to {args.out}")
    return EXIT_PASS if status == "PASS" else EXIT_VERIFICATION


def _cmd_verify(args):
    try:
        scene = load_scene(args.scene)
    except SceneError as err:
        print(f"scene error: {err}", file=sys.stderr)
        return EXIT_SCENE
    try:
        result = load_plan(args.plan, scene)
    except (OSError, KeyError, ValueError) as err:
        print(f"cannot load plan: {err}", file=sys.stderr)
        return EXIT_VERIFICATION
    report = verify_plan(result, scene)
    for check in report["checks"]:
        mark = "ok " if check["passed"] else "FAIL"
        print(f"  [{mark}] {check['name']}  margin={check['margin']:+.6f}")
    print(report["status"])
    return EXIT_PASS if report["status"] == "PASS" else EXIT_VERIFICATION


def main(argv=None):
    _configure_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plan":
            return _cmd_plan(args)
        return _cmd_verify(args)
    except VerificationError as err:
        print(f"verification failed: {err}", file=sys.stderr)
        return EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
