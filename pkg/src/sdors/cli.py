"""Command-line entry point: ``sdors {gen,solve,saa,evaluate,compare,sensitivity}``.

Exit codes: 0 success, 2 invalid input, 3 solver stopped at a limit without
an incumbent.  ``SDORS_SEED`` overrides ``--seed``.  Every output file gets
a ``<file>.manifest.json`` describing how to reproduce it.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__
from .model import DurationModel, Schedule, ValidationError, load_document, save_document
from .saa import (
    ALGORITHMS,
    SENSITIVITY_CASES,
    NoIncumbentError,
    SaaConfig,
    evaluate_schedule,
    run_sensitivity,
    saa_bounds,
    sensitivity_case,
    solve_deterministic,
    solver_for,
)
from .sampling import GenConfig, generate_instance, sample_scenarios, split_stream
from .two_stage import AlgoConfig

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_INCUMBENT = 3


@dataclass
class RunManifest:
    command: str
    flags: dict
    seeds: dict
    inputs: list[str]
    outputs: list[str]
    version: str = __version__
    wall_time: float = 0.0
    argv: list[str] = field(default_factory=list)

    def write(self, output: str | Path) -> Path:
        path = Path(f"{output}.manifest.json")
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


# --------------------------------------------------------------------------
# helpers


def effective_seed(seed: int) -> int:
    env = os.environ.get("SDORS_SEED")
    if env is None or env == "":
        return seed
    try:
        return int(env)
    except ValueError as exc:
        raise ValidationError(f"SDORS_SEED must be an integer, got {env!r}") from exc


def markdown_table(header: list[str], rows: list[list]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(v) for v in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load(path: str, need_scenarios: bool = False):
    if not Path(path).exists():
        raise ValidationError(f"input file {path} does not exist")
    inst, scen = load_document(path)
    if need_scenarios and scen is None:
        raise ValidationError(f"{path} carries no scenarios; pass --scenarios to sample them")
    return inst, scen


def _algo_config(args, algo: str):
    _, base = solver_for(algo)
    return replace(base, gap=args.gap, time_limit=args.time_limit, node_limit=args.node_limit,
                   ffd=not args.no_ffd, user_cuts=not args.no_user_cuts,
                   early_stop=not args.no_early_stop)


def _solve_one(inst, scen, algo: str, cfg):
    fn, _ = solver_for(algo)
    t0 = time.perf_counter()
    report, sched = fn(inst, scen, cfg)
    return report, sched, time.perf_counter() - t0


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> list[str]:
    seed = effective_seed(args.seed)
    cfg = GenConfig(patients=args.patients, hospitals=args.hospitals, days=args.days, rooms=args.rooms,
                    scenarios=args.scenarios, seed=seed, duration=DurationModel(sd=args.sd))
    inst = generate_instance(cfg)
    scen = sample_scenarios(inst, args.scenarios)
    save_document(args.out, inst, scen)
    return [args.out]


def cmd_solve(args) -> list[str]:
    inst, scen = _load(args.input, need_scenarios=args.scenarios is None)
    if args.scenarios is not None:
        scen = sample_scenarios(inst, args.scenarios, split_stream(effective_seed(args.seed), "solve"))
    report, sched, _ = _solve_one(inst, scen, args.algo, _algo_config(args, args.algo))
    outputs = []
    if args.report:
        Path(args.report).write_text(report.to_json(include_timing=not args.no_timing) + "\n")
        outputs.append(args.report)
    if sched is None:
        raise NoIncumbentError(f"{args.algo} stopped ({report.termination}) without an incumbent")
    if args.schedule:
        Path(args.schedule).write_text(json.dumps(sched.to_dict(), indent=2, sort_keys=True) + "\n")
        outputs.append(args.schedule)
    print(f"{args.algo}: objective {report.objective:.4f} bound {report.best_bound:.4f} "
          f"gap {100 * report.gap:.3f}% nodes {report.nodes} ({report.termination})")
    return outputs


SAA_HEADER = ["scenarios", "lb_mean", "lb_width", "ub_mean", "ub_width", "gap_pct"]


def cmd_saa(args) -> list[str]:
    inst, _ = _load(args.input)
    seed = effective_seed(args.seed)
    rows = []
    reports = []
    for S in args.scenarios:
        common = dict(algo=args.algo, gap=args.gap, time_limit=args.time_limit, seed=seed)
        if args.full:
            cfg = SaaConfig.full(S, **common)
        else:
            cfg = SaaConfig(S, replications=args.replications, select_scenarios=args.select,
                            ub_scenarios=args.ub, **common)
        rep = saa_bounds(inst, cfg)
        reports.append(rep.to_dict())
        rows.append([S, round(rep.lb_mean, 2), round(rep.lb_width, 2), round(rep.ub_mean, 2),
                     round(rep.ub_width, 2), round(100 * rep.gap, 2)])
        for msg in rep.failures:
            print(f"warning: {msg}", file=sys.stderr)
    write_csv(args.out, SAA_HEADER, rows)
    outputs = [args.out]
    if args.markdown:
        Path(args.markdown).write_text(markdown_table(SAA_HEADER, rows))
        outputs.append(args.markdown)
    if args.json:
        Path(args.json).write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")
        outputs.append(args.json)
    sys.stdout.write(markdown_table(SAA_HEADER, rows))
    return outputs


EVAL_HEADER = ["label", "cancellation_rate", "cancellation_width", "utilization", "utilization_width",
               "opened_utilization", "scheduled", "opened_rooms", "samples"]


def _eval_row(label: str, ev) -> list:
    return [label, round(ev.cancellation_rate, 6), round(ev.cancellation_width, 6), round(ev.utilization, 6),
            round(ev.utilization_width, 6), round(ev.opened_utilization, 6), ev.scheduled, ev.opened_rooms,
            ev.samples]


def cmd_evaluate(args) -> list[str]:
    inst, _ = _load(args.input)
    if not Path(args.schedule).exists():
        raise ValidationError(f"schedule file {args.schedule} does not exist")
    sched = Schedule.from_dict(json.loads(Path(args.schedule).read_text()))
    seed = split_stream(effective_seed(args.seed), "evaluate")
    ev = evaluate_schedule(inst, sched, args.samples, seed)
    rows = [_eval_row(args.label, ev)]
    write_csv(args.out, EVAL_HEADER, rows)
    sys.stdout.write(markdown_table(EVAL_HEADER, rows))
    return [args.out]


def _compare_cell(path: str, algo: str, gap: float, time_limit, node_limit) -> dict:
    inst, scen = _load(path, need_scenarios=True)
    _, base = solver_for(algo)
    cfg = replace(base, gap=gap, time_limit=time_limit, node_limit=node_limit)
    try:
        report, sched, wall = _solve_one(inst, scen, algo, cfg)
    except Exception as exc:  # recorded as a failed cell
        return {"cell": "-", "nodes": "-", "objective": None, "minutes": None, "gap": None, "error": str(exc)}
    solved = report.has_incumbent and report.gap <= gap + 1e-12
    return {
        "cell": format_cell(report.gap if report.has_incumbent else None, wall / 60.0, solved),
        "nodes": report.nodes,
        "objective": report.objective if report.has_incumbent else None,
        "minutes": wall / 60.0,
        "gap": report.gap if report.has_incumbent else None,
        "solved": solved,
    }


def format_cell(gap: float | None, minutes: float, solved: bool) -> str:
    """``"17.08(min)"`` when solved to the target gap, final gap like ``"8.8%"`` otherwise."""
    if solved:
        return f"{minutes:.2f}(min)"
    if gap is None or gap > 1.0:
        return "-"
    return f"{100 * gap:.1f}%"


def best_marker(cells: dict[str, dict]) -> str:
    solved = [(c["minutes"], a) for a, c in cells.items() if c.get("solved")]
    if solved:
        return min(solved)[1]
    gaps = [(c["gap"], a) for a, c in cells.items() if c.get("gap") is not None and c["gap"] <= 1.0]
    return min(gaps)[1] if gaps else "-"


def objective_spread(cells: dict[str, dict]) -> float | None:
    vals = [c["objective"] for c in cells.values() if c.get("objective") is not None]
    if len(vals) < 2:
        return None
    ref = max(abs(v) for v in vals) or 1.0
    return (max(vals) - min(vals)) / ref


def cmd_compare(args) -> list[str]:
    for path in args.instances:
        _load(path, need_scenarios=True)
    tasks = [(p, a) for p in args.instances for a in args.algos]
    call = (args.gap, args.time_limit, args.node_limit)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_compare_cell, p, a, *call) for p, a in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_compare_cell(p, a, *call) for p, a in tasks]
    by_key = dict(zip(tasks, results))
    header = ["instance"]
    for a in args.algos:
        header += [f"{a} time/gap", f"{a} nodes"]
    header += ["best", "objective_spread_pct"]
    rows = []
    for path in args.instances:
        cells = {a: by_key[(path, a)] for a in args.algos}
        row = [Path(path).stem]
        for a in args.algos:
            row += [cells[a]["cell"], cells[a]["nodes"]]
        spread = objective_spread(cells)
        row += [best_marker(cells), "-" if spread is None else f"{100 * spread:.4f}"]
        rows.append(row)
    write_csv(args.out, header, rows)
    outputs = [args.out]
    if args.markdown:
        Path(args.markdown).write_text(markdown_table(header, rows))
        outputs.append(args.markdown)
    sys.stdout.write(markdown_table(header, rows))
    return outputs


def cmd_sensitivity(args) -> list[str]:
    inst, scen = _load(args.input)
    case = sensitivity_case(inst, args.case)
    if not args.run:
        out_scen = None
        if scen is not None:
            out_scen = sample_scenarios(case, scen.count, scen.seed) if args.case == 1 else scen
        save_document(args.out, case, out_scen)
        return [args.out]
    res = run_sensitivity(inst, args.case, scenarios=args.scenarios, algo=args.algo, gap=args.gap,
                          time_limit=args.time_limit, samples=args.samples, seed=effective_seed(args.seed))
    rows = [_eval_row(label, ev) for label, ev in res.items()]
    write_csv(args.out, EVAL_HEADER, rows)
    sys.stdout.write(markdown_table(EVAL_HEADER, rows))
    return [args.out]


def cmd_deterministic(args) -> list[str]:
    inst, _ = _load(args.input)
    report, sched = solve_deterministic(inst, AlgoConfig(gap=args.gap, time_limit=args.time_limit))
    if sched is None:
        raise NoIncumbentError("deterministic model stopped without an incumbent")
    Path(args.schedule).write_text(json.dumps(sched.to_dict(), indent=2, sort_keys=True) + "\n")
    return [args.schedule]


# --------------------------------------------------------------------------
# parser


def _solver_flags(p: argparse.ArgumentParser, with_algo: bool = True) -> None:
    if with_algo:
        p.add_argument("--algo", choices=ALGORITHMS, default="three", help="solution algorithm")
    p.add_argument("--gap", type=float, default=0.01, help="relative optimality gap target")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per solve")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdors", description="Stochastic distributed operating room scheduling")
    ap.add_argument("--version", action="version", version=f"sdors {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance with a scenario set")
    p.add_argument("--patients", type=int, default=12)
    p.add_argument("--hospitals", type=int, default=2)
    p.add_argument("--days", type=int, default=2)
    p.add_argument("--rooms", type=int, default=2, help="rooms per hospital")
    p.add_argument("--scenarios", type=int, default=10)
    p.add_argument("--sd", type=float, default=40.0, help="duration standard deviation (minutes)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--in", dest="input", required=True)
    _solver_flags(p)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--scenarios", type=int, default=None, help="resample this many scenarios")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-ffd", action="store_true", help="skip the first-fit warm start")
    p.add_argument("--no-user-cuts", action="store_true")
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from the report")
    p.add_argument("--report", help="write the SolveReport JSON here")
    p.add_argument("--schedule", help="write the schedule JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("saa", help="SAA confidence intervals and worst-case gap")
    p.add_argument("--in", dest="input", required=True)
    _solver_flags(p)
    p.add_argument("--scenarios", type=int, nargs="+", default=[5, 10, 20])
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--select", type=int, default=200, help="scenarios used to pick the candidate")
    p.add_argument("--ub", type=int, default=1000, help="scenarios used for the upper bound")
    p.add_argument("--full", action="store_true", help="use 30 / 1000 / 10000")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--markdown")
    p.add_argument("--json", help="full per-replication reports")
    p.set_defaults(func=cmd_saa)

    p = sub.add_parser("evaluate", help="Monte-Carlo cancellation and utilization of a schedule")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="schedule")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="time/gap table across instances and algorithms")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    _solver_flags(p, with_algo=False)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--markdown")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sensitivity", help="apply a sensitivity case, optionally solving and evaluating it")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--case", type=int, choices=sorted(SENSITIVITY_CASES), required=True)
    p.add_argument("--run", action="store_true", help="solve baseline and case, then evaluate both")
    _solver_flags(p)
    p.add_argument("--scenarios", type=int, default=10)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("deterministic", help="schedule from the nominal-duration model")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--gap", type=float, default=0.0)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--schedule", required=True)
    p.set_defaults(func=cmd_deterministic)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        outputs = args.func(args)
    except NoIncumbentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INCUMBENT
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    inputs = [v for k, v in flags.items() if k in ("input", "schedule") and v and v not in outputs]
    inputs += list(flags.get("instances") or [])
    seeds = {"seed": flags.get("seed"), "SDORS_SEED": os.environ.get("SDORS_SEED")}
    manifest = RunManifest(args.command, flags, seeds, inputs, outputs,
                           wall_time=time.perf_counter() - t0, argv=argv)
    for out in outputs:
        manifest.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
