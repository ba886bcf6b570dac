"""Command-line front end: run scenarios, compare trajectories, build tables.

Subcommands:
  run    execute one or all controller modes for every start point, exporting
         trajectory CSVs, learned-barrier level-set grids, and a JSON summary
  eval   print correlation / Frechet distance for two trajectory CSVs and
         append them to a metrics report CSV
  table  collect per-case metrics from a run directory into a table
  sdf    dump the ground-truth signed-distance grid as CSV

Exit status is 0 only when every run finishes without error and without a
single safety violation.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import metrics, sim, svm
from .environment import ScenarioError, build_sdf_grid, load_scenario
from .sensor import SensorError

OUTPUT_DIR_ENV = "CBFLEARN_OUT"
ALL_MODES = (sim.MODE_GROUND_TRUTH, sim.MODE_OFFLINE,
             sim.MODE_ONLINE_AGGREGATE, sim.MODE_ONLINE_INSTANT)
LEARNED_MODES = (sim.MODE_OFFLINE, sim.MODE_ONLINE_AGGREGATE,
                 sim.MODE_ONLINE_INSTANT)
_CASE_FILE = re.compile(r"case(\d+)_(" + "|".join(ALL_MODES) + r")\.csv$")

_KNOWN_ERRORS = (ScenarioError, SensorError, sim.StartUnsafeError,
                 svm.DegenerateDataError, svm.HardMarginInfeasibleError,
                 ValueError, OSError)


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ScenarioError(f"override {item!r} is not KEY=VALUE")
        out[key] = value
    return out


def _resolve_scenario(name_or_path: str) -> str:
    if os.path.sep in name_or_path or name_or_path.endswith(".toml"):
        return name_or_path
    from . import builtin_scenario_path
    return str(builtin_scenario_path(name_or_path))


def _case_rng(seed: int, case: int, mode: str) -> np.random.Generator:
    return np.random.default_rng([seed, case, ALL_MODES.index(mode)])


def _run_case(scenario, case: int, mode: str, seed: int, out_dir: str,
              levelset_spacing: float, shared) -> dict:
    """Execute one (start point, mode) pipeline and export its artifacts.

    `shared` carries the precomputed ground-truth grid and offline model so
    they are built once per invocation, not once per case.
    """
    start = scenario.x_start[case]
    rng = _case_rng(seed, case, mode)
    if mode == sim.MODE_GROUND_TRUTH:
        report = sim.run_ground_truth(scenario, start, grid=shared["grid"])
    elif mode == sim.MODE_OFFLINE:
        report = sim.run_offline(scenario, start, model=shared["model"],
                                 data=shared["data"])
    else:
        report = sim.run_online(scenario, start,
                                aggregate=(mode == sim.MODE_ONLINE_AGGREGATE),
                                rng=rng)
    stem = os.path.join(out_dir, f"case{case:02d}_{mode}")
    report.trajectory.to_csv(stem + ".csv")
    if mode in LEARNED_MODES and report.final_model is not None:
        sim.export_levelset(report.final_model, scenario, levelset_spacing,
                            stem + "_levelset.csv")
    return {
        "case": case,
        "mode": mode,
        "steps": report.trajectory.steps,
        "reached_goal": bool(report.trajectory.reached_goal),
        "safety_violations": report.safety_violations,
        "training_set_size": report.training_set_size,
        "retrain_count": report.retrain_count,
        "unconstrained_steps": report.unconstrained_steps,
        "min_barrier_value": report.min_barrier_value,
        "min_true_sdf": report.min_true_sdf,
        "wall_time": report.wall_time,
    }


def _run_case_star(args):
    return _run_case(*args)


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(_resolve_scenario(args.scenario),
                             _parse_overrides(args.override))
    out_dir = args.out or os.environ.get(OUTPUT_DIR_ENV) or "."
    os.makedirs(out_dir, exist_ok=True)
    modes = list(ALL_MODES) if args.mode == "all" else [args.mode]

    shared = {"grid": None, "model": None, "data": None}
    if sim.MODE_GROUND_TRUTH in modes:
        shared["grid"] = build_sdf_grid(scenario, args.sdf_spacing)
    if sim.MODE_OFFLINE in modes:
        shared["data"] = sim.mapping_pass(
            scenario, rng=_case_rng(args.seed, 0, sim.MODE_OFFLINE))
        if len(shared["data"]) >= 2 and shared["data"].has_both_labels():
            shared["model"] = sim.train_barrier(scenario, shared["data"])

    tasks = [(scenario, case, mode, args.seed, out_dir,
              args.levelset_spacing, shared)
             for case in range(len(scenario.x_start)) for mode in modes]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_case_star, tasks))
    else:
        results = [_run_case_star(t) for t in tasks]

    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump({"scenario": args.scenario, "seed": args.seed,
                   "runs": results}, f, indent=2)

    violations = sum(r["safety_violations"] for r in results)
    for r in results:
        flag = "" if r["safety_violations"] == 0 else \
            f"  [{r['safety_violations']} SAFETY VIOLATIONS]"
        print(f"case{r['case']:02d} {r['mode']:>16s}: steps={r['steps']:5d} "
              f"goal={'yes' if r['reached_goal'] else 'no '} "
              f"min_h={r['min_barrier_value']:+.4f} "
              f"min_sdf={r['min_true_sdf']:+.4f}{flag}")
    if args.mode == "all":
        _emit_table(out_dir)
    if violations:
        print(f"error: {violations} safety violations across runs",
              file=sys.stderr)
        return 1
    return 0


def _labels_from_path(path: str) -> tuple[str, str]:
    m = _CASE_FILE.search(os.path.basename(path))
    if m:
        return m.group(1), m.group(2)
    return "-", os.path.splitext(os.path.basename(path))[0]


def cmd_eval(args: argparse.Namespace) -> int:
    a = sim.read_trajectory_csv(args.traj_a)
    b = sim.read_trajectory_csv(args.traj_b)
    r, f_dist = metrics.compare_trajectories(a, b)
    print(f"R = {r:.6f}")
    print(f"F = {f_dist:.6f}")
    case_a, mode_a = _labels_from_path(args.traj_a)
    case_b, mode_b = _labels_from_path(args.traj_b)
    case = case_a if case_a != "-" else case_b
    write_header = not os.path.exists(args.report)
    with open(args.report, "a") as fh:
        if write_header:
            fh.write("case,mode_a,mode_b,R,F\n")
        fh.write(f"{case},{mode_a},{mode_b},{r!r},{f_dist!r}\n")
    return 0


_TABLE_PAIRS = (
    (sim.MODE_OFFLINE, sim.MODE_GROUND_TRUTH, "off_gt"),
    (sim.MODE_ONLINE_AGGREGATE, sim.MODE_GROUND_TRUTH, "on_gt"),
    (sim.MODE_OFFLINE, sim.MODE_ONLINE_AGGREGATE, "off_on"),
)


def _emit_table(run_dir: str) -> None:
    """Per-case R and F for the three standard mode comparisons."""
    cases: dict[int, dict[str, str]] = {}
    for name in sorted(os.listdir(run_dir)):
        m = _CASE_FILE.search(name)
        if m:
            cases.setdefault(int(m.group(1)), {})[m.group(2)] = \
                os.path.join(run_dir, name)
    columns = [f"{kind}_{tag}" for kind in ("R", "F")
               for _, _, tag in _TABLE_PAIRS]
    rows = []
    for case in sorted(cases):
        files = cases[case]
        row: dict[str, float | None] = {}
        for mode_a, mode_b, tag in _TABLE_PAIRS:
            if mode_a in files and mode_b in files:
                r, f_dist = metrics.compare_trajectories(
                    sim.read_trajectory_csv(files[mode_a]),
                    sim.read_trajectory_csv(files[mode_b]))
                row[f"R_{tag}"], row[f"F_{tag}"] = r, f_dist
            else:
                row[f"R_{tag}"] = row[f"F_{tag}"] = None
        rows.append((case, row))

    csv_path = os.path.join(run_dir, "table.csv")
    with open(csv_path, "w") as fh:
        fh.write("case," + ",".join(columns) + "\n")
        for case, row in rows:
            cells = ["" if row[c] is None else repr(row[c]) for c in columns]
            fh.write(f"{case}," + ",".join(cells) + "\n")
        if rows:
            avgs = []
            for c in columns:
                vals = [row[c] for _, row in rows if row[c] is not None]
                avgs.append(repr(float(np.mean(vals))) if vals else "")
            fh.write("average," + ",".join(avgs) + "\n")

    width = 10
    header = f"{'case':>7s}" + "".join(f"{c:>{width}s}" for c in columns)
    print(header)
    for case, row in rows:
        cells = "".join(f"{row[c]:>{width}.4f}" if row[c] is not None
                        else f"{'absent':>{width}s}" for c in columns)
        print(f"{case:>7d}" + cells)
    if rows:
        cells = []
        for c in columns:
            vals = [row[c] for _, row in rows if row[c] is not None]
            cells.append(f"{np.mean(vals):>{width}.4f}" if vals
                         else f"{'absent':>{width}s}")
        print(f"{'average':>7s}" + "".join(cells))


def cmd_table(args: argparse.Namespace) -> int:
    _emit_table(args.run_dir)
    return 0


def cmd_sdf(args: argparse.Namespace) -> int:
    scenario = load_scenario(_resolve_scenario(args.scenario),
                             _parse_overrides(args.override))
    grid = build_sdf_grid(scenario, args.spacing)
    out_dir = args.out or os.environ.get(OUTPUT_DIR_ENV) or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sdf_grid.csv")
    ny, nx = grid.values.shape
    with open(path, "w") as fh:
        fh.write("x,y,sdf\n")
        for j in range(ny):
            y = grid.origin[1] + j * grid.spacing
            for i in range(nx):
                x = grid.origin[0] + i * grid.spacing
                fh.write(f"{float(x)!r},{float(y)!r},{float(grid.values[j, i])!r}\n")
    print(f"wrote {path} ({nx} x {ny})")
    return 0


def _add_override(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted scenario override, e.g. control.gamma=2.0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbflearn",
        description="Learned-barrier safe navigation: run, evaluate, tabulate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run scenario modes and export CSVs")
    p_run.add_argument("--scenario", required=True,
                       help="TOML path or built-in name (e.g. five_ellipse)")
    p_run.add_argument("--mode", default="all",
                       choices=list(ALL_MODES) + ["all"])
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", default=None,
                       help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="worker processes for batch cases")
    p_run.add_argument("--sdf-spacing", type=float, default=0.01,
                       help="ground-truth grid spacing [m]")
    p_run.add_argument("--levelset-spacing", type=float, default=0.05,
                       help="learned-barrier export grid spacing [m]")
    _add_override(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="compare two trajectory CSVs")
    p_eval.add_argument("traj_a")
    p_eval.add_argument("traj_b")
    p_eval.add_argument("--report", default="metrics_report.csv",
                        help="metrics report CSV to append to")
    p_eval.set_defaults(func=cmd_eval)

    p_table = sub.add_parser("table", help="tabulate metrics for a run dir")
    p_table.add_argument("run_dir")
    p_table.set_defaults(func=cmd_table)

    p_sdf = sub.add_parser("sdf", help="dump ground-truth distance grid")
    p_sdf.add_argument("--scenario", required=True)
    p_sdf.add_argument("--spacing", type=float, default=0.02)
    p_sdf.add_argument("--out", default=None)
    _add_override(p_sdf)
    p_sdf.set_defaults(func=cmd_sdf)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
