"""Command-line entry point.

Subcommands:
  plan        solve one scene and write the stop plan as JSON
  experiment  run a benchmark sweep (CSV + summary + charts)
  inspect     dump reachability rasters and partition tables for one scene

Exit codes: 0 success, 1 runtime failure (solver/simulation), 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .errors import InputError, RhtpError
from .experiment import (
    RunConfig,
    config_from_dict,
    format_summary,
    load_config,
    run_experiment,
)
from .ioutil import atomic_write_text
from .partition import dump_partition
from .planner import PlanningConfig, plan_scene, save_plan
from .reachability import dump_ptrm
from .scene import ArmParams, load_scene


def _arm_from_args(args) -> ArmParams:
    return ArmParams(
        manip_r_min=args.manip_r_min,
        manip_r_max=args.manip_r_max,
        obs_r_min=args.obs_r_min,
        obs_r_max=args.obs_r_max,
    )


def _add_arm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manip-r-min", type=float, default=0.15)
    parser.add_argument("--manip-r-max", type=float, default=1.05)
    parser.add_argument("--obs-r-min", type=float, default=0.0)
    parser.add_argument("--obs-r-max", type=float, default=1.25)


def _add_planning_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cell-size", type=float, default=0.02)
    parser.add_argument("--mc-samples", type=int, default=2000)
    parser.add_argument("--gamma", type=float, default=1.12)
    parser.add_argument("--delta", type=float, default=0.7)
    parser.add_argument("--seed", type=int, default=0)


def _planning_config(args) -> PlanningConfig:
    return PlanningConfig(
        cell_size=args.cell_size,
        mc_samples=args.mc_samples,
        gamma=args.gamma,
        delta=args.delta,
        seed=args.seed,
    )


def cmd_plan(args) -> int:
    scene = load_scene(args.scene)
    config = _planning_config(args)
    arm = _arm_from_args(args)
    t0 = time.perf_counter()
    result = plan_scene(scene, arm, config)
    elapsed = time.perf_counter() - t0
    plan = result.plan
    if args.out:
        save_plan(plan, scene, args.out)
    print(f"targets:    {len(scene.targets)}")
    print(f"regions:    {len(result.partition.regions)}")
    print(f"stops:      {plan.kappa}")
    print(f"path [m]:   {plan.path_length:.6f}")
    print(f"energy:     {plan.total_cost:.6f}")
    print(f"solve time: {elapsed:.3f} s  ({result.solution.nodes} nodes)")
    if args.out:
        print(f"plan written to {args.out}")
    return 0


def cmd_experiment(args) -> int:
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "jobs": args.jobs,
    }
    if args.truth_samples is not None:
        overrides["truth_samples"] = args.truth_samples
    if args.no_charts:
        overrides["charts"] = False
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        config = config_from_dict({}, **overrides)
    t0 = time.perf_counter()

    def progress(scene_id: str) -> None:
        if not args.quiet:
            print(f"  done {scene_id}  [{time.perf_counter() - t0:.1f} s]")

    result = run_experiment(config, progress=progress)
    summary_text = format_summary(result.summary)
    print(summary_text)
    atomic_write_text(os.path.join(config.out_dir, "summary.txt"), summary_text + "\n")
    print(f"rows:    {len(result.records)} -> {result.csv_path}")
    for p in result.chart_paths:
        print(f"chart:   {p}")
    print(f"elapsed: {time.perf_counter() - t0:.1f} s")
    return 0


def cmd_inspect(args) -> int:
    scene = load_scene(args.scene)
    config = _planning_config(args)
    arm = _arm_from_args(args)
    result = plan_scene(scene, arm, config)
    os.makedirs(args.out, exist_ok=True)
    dump_ptrm(result.ptrm, args.out)
    dump_partition(result.partition, args.out)
    save_plan(result.plan, scene, os.path.join(args.out, "plan.json"))
    print(f"targets:  {len(scene.targets)}")
    print(f"grid:     {result.ptrm.grid.nx} x {result.ptrm.grid.ny} cells")
    print(f"regions:  {len(result.partition.regions)}")
    print(f"artifacts in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhtp",
        description="Minimum expected-energy base-stop planning for observe-then-manipulate tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="solve one scene")
    p_plan.add_argument("scene", help="scene JSON file")
    p_plan.add_argument("--out", help="write the plan JSON here")
    _add_arm_flags(p_plan)
    _add_planning_flags(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_exp = sub.add_parser("experiment", help="run a benchmark sweep")
    p_exp.add_argument("--config", help="run configuration JSON")
    p_exp.add_argument("--seed", type=int, default=None)
    p_exp.add_argument("--out", default=None, help="output directory")
    p_exp.add_argument("--jobs", type=int, default=None)
    p_exp.add_argument("--truth-samples", type=int, default=None)
    p_exp.add_argument("--no-charts", action="store_true")
    p_exp.add_argument("--quiet", action="store_true")
    p_exp.set_defaults(func=cmd_experiment)

    p_ins = sub.add_parser("inspect", help="dump rasters and partition tables")
    p_ins.add_argument("scene", help="scene JSON file")
    p_ins.add_argument("--out", default="inspect_out")
    _add_arm_flags(p_ins)
    _add_planning_flags(p_ins)
    p_ins.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RhtpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
