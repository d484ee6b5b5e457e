"""Command-line entry point: ``skelnav <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench as bench_mod
from .graph import build_graph, write_graph
from .map_io import MapError, load_map, save_map, sidecar_path
from .map_reader import (EmptyMapError, ReaderParams, dump_stages, extract_waypoints, read_waypoints,
                         run_stages, write_waypoints)
from .navigator import MissionConfig, ScanParams, destination_poses, format_report, mission_metrics, run_mission
from .planner import PlannerParams, path_metrics, plan, read_path, write_path
from .pose import Pose2D, Tolerance
from .sim import SimConfig, SimulatorFault, World
from .synthetic import KINDS, generate_synthetic_map

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2  # argparse's own code
EXIT_EMPTY_MAP = 3
EXIT_BAD_MAP = 4
EXIT_NO_WAYPOINTS = 5
EXIT_SIM_FAULT = 6

log = logging.getLogger("skelnav")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y but got {text!r}") from None
    return a, b


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(args, text: str, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text)


def _figures_dir(args) -> Path | None:
    if getattr(args, "figures", None) is None:
        return None
    out = Path(args.figures)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    meta = args.meta or sidecar_path(args.map)
    try:
        return load_map(args.map, meta)
    except FileNotFoundError as exc:
        raise CliError(f"map: {exc}", EXIT_BAD_MAP) from None
    except MapError as exc:
        raise CliError(f"map: {exc}", EXIT_BAD_MAP) from None


# ------------------------------------------------------------------ commands

def cmd_gen_map(args) -> int:
    size = args.size if len(args.size) == 2 else (args.size[0], args.size[0])
    grid = generate_synthetic_map(args.kind, size, args.resolution, seed=args.seed)
    img, meta = save_map(grid, args.out)
    _emit(args, f"wrote {img} ({grid.height}x{grid.width}) and {meta}\n",
          {"map": str(img), "meta": str(meta), "height": grid.height, "width": grid.width})
    return EXIT_OK


def cmd_read_map(args) -> int:
    grid = _load(args)
    params = ReaderParams(args.sigma, args.kappa, args.erode)
    try:
        stages = run_stages(grid, params)
    except EmptyMapError as exc:
        raise CliError(f"stage {exc.stage}: {exc}", EXIT_EMPTY_MAP) from None
    if args.stages_out is not None:
        dump_stages(stages, args.stages_out)
    wps = extract_waypoints(stages["skeleton"], axis_order=args.axis_order)
    write_waypoints(args.out, wps)
    figs = _figures_dir(args)
    if figs is not None:
        from .plotting import plot_stages

        plot_stages(stages, figs / "stages.png")
    _emit(args, f"waypoints {len(wps)}\nwrote {args.out}\n",
          {"waypoints": len(wps), "out": str(args.out),
           "stages_out": None if args.stages_out is None else str(args.stages_out)})
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        wps = read_waypoints(args.waypoints)
    except FileNotFoundError as exc:
        raise CliError(f"plan: {exc}", EXIT_NO_WAYPOINTS) from None
    if len(wps) == 0:
        raise CliError("plan: waypoint file is empty", EXIT_NO_WAYPOINTS)
    graph = build_graph(wps, args.resolution)
    if graph.n_components > 1:
        print(f"warning: waypoint graph has {graph.n_components} components"
              + ("" if args.all_components else "; only the starting one is planned"), file=sys.stderr)
    try:
        planned = plan(graph, PlannerParams(args.spacing, args.start), args.all_components)
    except ValueError as exc:
        raise CliError(f"plan: {exc}") from None
    write_path(args.out, planned, args.spacing, graph.resolution, args.start)
    if args.graph_out is not None:
        write_graph(args.graph_out, graph)
    summary = path_metrics(planned)
    figs = _figures_dir(args)
    if figs is not None:
        from .plotting import plot_path, plot_spacing

        if args.map is not None:
            plot_path(_load(args), graph.points, planned.spliced_path, figs / "path.png", args.start,
                      wps.axis_order)
        plot_spacing(summary, args.spacing, figs / "spacing.png")
    text = (
        f"full path {len(planned.full_path)}\n"
        f"spliced path {len(planned.spliced_path)}\n"
        f"stride {planned.stride}\n"
        f"total length {summary.total_length:.3f} m\n"
        f"mean spacing {'-' if summary.mean_spacing is None else f'{summary.mean_spacing:.3f} m'}\n"
        f"vertex coverage {100 * planned.vertex_coverage:.1f} %\n"
    )
    _emit(args, text, {
        "full_path": len(planned.full_path), "spliced_path": len(planned.spliced_path),
        "stride": planned.stride, "total_length": summary.total_length,
        "mean_spacing": summary.mean_spacing, "vertex_coverage": planned.vertex_coverage,
        "components": graph.n_components, "unplanned_components": planned.unplanned_components,
    })
    return EXIT_OK


def _simulate(args, grid, points, start_xy):
    cfg = SimConfig(drift_rate=args.drift, seed=args.seed, robot_radius=args.robot_radius,
                    axis_order=args.axis_order)
    tol = Tolerance(args.tol_pos, args.tol_yaw, args.timeout)
    scan = None if args.scan_orientations == 0 else ScanParams(args.scan_orientations, tuple(args.gestures))
    start = Pose2D(start_xy[0], start_xy[1], args.start_yaw)
    world = World(grid, cfg, start)
    mission = MissionConfig(tolerance=tol, scan=scan, interrupts=tuple(args.interrupt_at or ()),
                            max_retries=args.max_retries, assist_delay=args.assist_delay)
    run = run_mission(points, world, mission)
    return world, run


def _write_sim_outputs(args, out_dir: Path, grid, world, run, points):
    report = mission_metrics(run)
    run.write(out_dir / "run.log")
    world.write_trace(out_dir / "trace.txt")
    table = format_report([(args.trial, report)])
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    figs = _figures_dir(args)
    if figs is not None:
        from .plotting import plot_trajectory, plot_waypoint_times

        plot_waypoint_times(run, figs / "waypoint_times.png")
        goals = np.array([g.xy for g in destination_poses(points, world.start)]).reshape(-1, 2)
        plot_trajectory(grid, world.trace, goals, figs / "trajectory.png", args.axis_order)
    return report, table


def cmd_simulate(args) -> int:
    grid = _load(args)
    try:
        pf = read_path(args.path)
    except (FileNotFoundError, ValueError) as exc:
        raise CliError(f"simulate: {exc}", EXIT_NO_WAYPOINTS) from None
    start = args.start if args.start is not None else pf.start
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    world, run = _simulate(args, grid, pf.points, start)
    report, table = _write_sim_outputs(args, out_dir, grid, world, run, pf.points)
    _emit(args, table, {"trial": args.trial, **report.as_dict(),
                        "captures": len(run.captures), "aborted": run.aborted})
    if run.aborted:
        print(f"error: simulation aborted: {run.abort_reason}", file=sys.stderr)
        return EXIT_SIM_FAULT
    return EXIT_OK


def cmd_bench(args) -> int:
    parts, payload = [], {}
    if not args.skip_reader:
        recs = bench_mod.bench_read_map(args.sizes, args.reader_iterations)
        fit = bench_mod.linear_fit([r.size for r in recs], [r.mean for r in recs])
        parts.append("read_map\n" + bench_mod.format_bench(recs, "pixels", fit))
        payload["read_map"] = {"records": [r.__dict__ for r in recs], "fit": fit and fit.__dict__}
    if not args.skip_planner:
        recs2 = bench_mod.bench_plan(args.counts, args.planner_iterations)
        fit2 = bench_mod.linear_fit([r.size for r in recs2], [r.mean for r in recs2])
        parts.append("plan\n" + bench_mod.format_bench(recs2, "waypoints", fit2))
        payload["plan"] = {"records": [r.__dict__ for r in recs2], "fit": fit2 and fit2.__dict__}
    figs = _figures_dir(args)
    if figs is not None:
        from .plotting import plot_bench

        if "read_map" in payload:
            plot_bench(recs, fit, figs / "bench_read_map.png", "pixels")
        if "plan" in payload:
            plot_bench(recs2, fit2, figs / "bench_plan.png", "waypoints")
    text = "\n".join(parts)
    if args.out is not None:
        Path(args.out).write_text(text, encoding="utf-8")
    _emit(args, text, payload)
    return EXIT_OK


def cmd_run_all(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.map is None:
        size = args.size if len(args.size) == 2 else (args.size[0], args.size[0])
        grid = generate_synthetic_map(args.kind, size, args.resolution, seed=args.seed)
        args.map, args.meta = (str(p) for p in save_map(grid, out / "map.pgm"))
    grid = _load(args)
    try:
        stages = run_stages(grid, ReaderParams(args.sigma, args.kappa, args.erode))
    except EmptyMapError as exc:
        raise CliError(f"stage {exc.stage}: {exc}", EXIT_EMPTY_MAP) from None
    dump_stages(stages, out / "stages")
    wps = extract_waypoints(stages["skeleton"], axis_order=args.axis_order)
    write_waypoints(out / "waypoints.txt", wps)
    if len(wps) == 0:
        raise CliError("run-all: no waypoints", EXIT_NO_WAYPOINTS)
    graph = build_graph(wps)
    if graph.n_components > 1:
        print(f"warning: waypoint graph has {graph.n_components} components", file=sys.stderr)
    start = args.start
    if start is None:
        start = tuple(float(v) for v in wps.points[0])
    planned = plan(graph, PlannerParams(args.spacing, start), args.all_components)
    write_path(out / "path.txt", planned, args.spacing, graph.resolution, start)
    figs = _figures_dir(args)
    if figs is not None:
        from .plotting import plot_path, plot_spacing, plot_stages

        plot_stages(stages, figs / "stages.png")
        plot_path(grid, graph.points, planned.spliced_path, figs / "path.png", start, args.axis_order)
        plot_spacing(path_metrics(planned), args.spacing, figs / "spacing.png")
    world, run = _simulate(args, grid, planned.spliced_path, start)
    report, table = _write_sim_outputs(args, out, grid, world, run, planned.spliced_path)
    summary = path_metrics(planned)
    text = (f"waypoints {len(wps)}\nfull path {len(planned.full_path)}\n"
            f"spliced path {len(planned.spliced_path)}\ntotal length {summary.total_length:.3f} m\n\n" + table)
    _emit(args, text, {"waypoints": len(wps), "full_path": len(planned.full_path),
                       "spliced_path": len(planned.spliced_path), "total_length": summary.total_length,
                       "trial": args.trial, **report.as_dict(), "aborted": run.aborted})
    return EXIT_SIM_FAULT if run.aborted else EXIT_OK


# ------------------------------------------------------------------ parser

def _add_map(p, required=True):
    p.add_argument("--map", required=required, help="PGM occupancy map")
    p.add_argument("--meta", help="metadata sidecar (default: <map>.meta)")


def _add_reader(p):
    p.add_argument("--sigma", type=int, default=3, help="Gaussian standard deviation in pixels")
    p.add_argument("--kappa", type=int, default=128, help="binarization threshold")
    p.add_argument("--erode", type=int, default=10, help="erosion kernel side in pixels")
    p.add_argument("--axis-order", choices=("row_col", "col_row"), default="row_col",
                   help="pixel axis that maps to world x")


def _add_sim(p):
    p.add_argument("--tol-pos", type=float, default=0.05, help="position tolerance (m)")
    p.add_argument("--tol-yaw", type=float, default=0.08, help="yaw tolerance (rad)")
    p.add_argument("--timeout", type=float, default=10.0, help="navigation timeout per attempt (s)")
    p.add_argument("--drift", type=float, default=0.0, help="heading drift rate (rad/sqrt(s))")
    p.add_argument("--interrupt-at", type=_floats, help="operator interrupt times in seconds, comma separated")
    p.add_argument("--start-yaw", type=float, default=0.0, help="initial heading (rad)")
    p.add_argument("--robot-radius", type=float, default=0.35)
    p.add_argument("--max-retries", type=int, default=5, help="timeouts before a waypoint is abandoned")
    p.add_argument("--assist-delay", type=float, default=5.0, help="seconds the operator takes to reposition")
    p.add_argument("--scan-orientations", type=int, default=0, help="scan headings per waypoint (0 disables)")
    p.add_argument("--gestures", type=lambda s: s.split(","), default=["stand", "sit"])
    p.add_argument("--trial", default="1", help="trial label in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skelnav", description="Skeleton waypoint coverage navigation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--figures", help="directory for PNG figures")

    p = sub.add_parser("gen-map", parents=[common], help="write a synthetic tri-level map")
    p.add_argument("--kind", choices=KINDS, default="l_room")
    p.add_argument("--size", type=_ints, default=(200,), help="N or H,W pixels")
    p.add_argument("--resolution", type=float, default=0.10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_map)

    p = sub.add_parser("read-map", parents=[common], help="extract skeleton waypoints")
    _add_map(p)
    _add_reader(p)
    p.add_argument("--stages-out", help="directory for the six stage dumps")
    p.add_argument("--out", default="waypoints.txt")
    p.set_defaults(func=cmd_read_map)

    p = sub.add_parser("plan", parents=[common], help="order and splice waypoints")
    p.add_argument("--waypoints", required=True)
    p.add_argument("--spacing", type=float, default=1.0, help="waypoint spacing D (m)")
    p.add_argument("--resolution", type=float, help="override the waypoint file's resolution")
    p.add_argument("--start", type=_pair, required=True, help="robot start x,y (m)")
    p.add_argument("--all-components", action="store_true", help="chain every graph component")
    p.add_argument("--graph-out")
    p.add_argument("--out", default="path.txt")
    _add_map(p, required=False)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", parents=[common], help="run a mission over a planned path")
    _add_map(p)
    p.add_argument("--path", required=True)
    p.add_argument("--start", type=_pair, help="start x,y (default: from the path file)")
    p.add_argument("--axis-order", choices=("row_col", "col_row"), default="row_col")
    p.add_argument("--out-dir", default=".")
    _add_sim(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="time the reader and the planner")
    p.add_argument("--sizes", type=_ints, default=(100, 200, 400, 800), help="map side lengths")
    p.add_argument("--counts", type=_ints, default=(10, 100, 1000, 10000), help="waypoint counts")
    p.add_argument("--reader-iterations", type=int, default=100)
    p.add_argument("--planner-iterations", type=int, default=500)
    p.add_argument("--skip-reader", action="store_true")
    p.add_argument("--skip-planner", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("run-all", parents=[common], help="read, plan and simulate in one go")
    _add_map(p, required=False)
    _add_reader(p)
    p.add_argument("--kind", choices=KINDS, default="l_room", help="generated map when --map is absent")
    p.add_argument("--size", type=_ints, default=(200,))
    p.add_argument("--resolution", type=float, default=0.10)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--start", type=_pair)
    p.add_argument("--all-components", action="store_true")
    p.add_argument("--out-dir", default="run")
    _add_sim(p)
    p.set_defaults(func=cmd_run_all)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if hasattr(args, "size") and len(args.size) not in (1, 2):
        parser.error("--size takes N or H,W")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SimulatorFault as exc:
        print(f"error: simulation: {exc}", file=sys.stderr)
        return EXIT_SIM_FAULT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
