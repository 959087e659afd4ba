# cli.py
"""
Batch front end.

    python cli.py params santiago16
    python cli.py solve tiny8 --model 1a --engine highs --out out/tiny8
    python cli.py simulate fig5-skip --baseline fig5-standard
    python cli.py simulate tiny8 --solution out/tiny8/solution.txt
    python cli.py pareto tiny8 --model 3a --epsilon 1
    python cli.py solve --instance 5-16-30 --period M --mode peak --model 1b
    python cli.py fixture santiago16 --out instances/santiago16.json

An instance is a JSON file path, a bundled fixture name, or ``--instance R-S-T``.
Exit codes: 0 solved, 1 bad input, 2 infeasible, 3 time limit.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from errors import EmptyFrontier, Infeasible, MetroTimetableError, MissingParameter, SchemaError, TimeLimitReached
from formulation.assemble import build_model, describe
from formulation.config import MODEL_IDS
from network.demand import DIRECTIONS, directional_total, restrict, scale
from network.topology import (
    DwellPolicy,
    compute_crowdedness,
    required_services,
    site_intermediate_depots,
)
from processors.fixtures import FIXTURES, generate_fixture, load_fixture, parse_rst, rst_document
from processors.flow_sim import finish_time, metrics, reduction, simulate, total_waiting_time, write_trace_csv
from processors.instance_loader import LoadedInstance, build_instance, canonical_text, load_instance, write_instance
from processors.manifest import sha256_text, write_manifest
from processors.timetable import (
    check_timetable,
    read_timetable_csv,
    timetable_from_solution,
    write_timetable_csv,
)
from services.mps import read_mps, write_mps
from services.pareto import SWEEP_DIRECTIONS, frontier_frame, sweep
from services.solution_io import read_solution, write_solution
from services.solver import ENGINES, SolverOptions, exit_code, solve
from settings import load_settings, with_overrides

log = logging.getLogger("cli")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


# ---------------- Internal helpers ----------------

def _common(parser: argparse.ArgumentParser, with_source: bool = True) -> None:
    if with_source:
        parser.add_argument("source", nargs="?", help="instance JSON path or bundled fixture name")
        parser.add_argument("--instance", help="R-S-T shorthand, e.g. 5-16-30")
        parser.add_argument("--period", default="M", choices=("M", "MD", "E"))
        parser.add_argument("--mode", choices=("off_peak", "peak"))
        parser.add_argument("--model", choices=MODEL_IDS)
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS)
    parser.add_argument("--time-limit", type=float, help="seconds per solve")
    parser.add_argument("--engine", choices=ENGINES)
    parser.add_argument("--seed", type=int, help="seed for generated demand")
    parser.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metro-tt", description="Metro timetabling with short-turning and skip-stop")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="derived line parameters")
    _common(p)
    p.add_argument("--demand", type=float, default=1.0, help="demand multiplier; 0 removes all demand")

    p = sub.add_parser("build", help="assemble a model and write it as MPS")
    _common(p)

    p = sub.add_parser("solve", help="solve a model, write solution and timetable")
    _common(p)

    p = sub.add_parser("simulate", help="replay passenger flows over a timetable")
    _common(p)
    source = p.add_mutually_exclusive_group()
    source.add_argument("--timetable", help="timetable CSV (defaults to the one embedded in the instance)")
    source.add_argument("--solution", help="solution file written by `solve`, turned back into a timetable")
    p.add_argument("--baseline", help="second instance whose timetable serves as the comparison base")

    p = sub.add_parser("pareto", help="epsilon-constraint frontier of a bi-objective model")
    _common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--direction", choices=SWEEP_DIRECTIONS, default="quality_primary")

    p = sub.add_parser("export-mps", help="write an instance (or re-write an MPS file) as MPS")
    _common(p)
    p.add_argument("--from-mps", help="existing MPS file to normalize instead of building a model")

    p = sub.add_parser("fixture", help="write a bundled instance to disk")
    p.add_argument("name", choices=FIXTURES)
    _common(p, with_source=False)
    return parser


def _resolve(source: Optional[str], args: argparse.Namespace) -> LoadedInstance:
    if getattr(args, "instance", None):
        trains, stations, minutes = parse_rst(args.instance)
        doc = rst_document(
            trains, stations, minutes, args.period, args.mode or "off_peak",
            seed=args.seed if args.seed is not None else 2023,
        )
        loaded = build_instance(doc)
    elif not source:
        raise MissingParameter("instance (file path, fixture name or --instance R-S-T)")
    elif Path(source).exists():
        loaded = load_instance(source, args.seed)
    else:
        loaded = load_fixture(source, args.seed)

    model = getattr(args, "model", None)
    if model is None and getattr(args, "mode", None) and not getattr(args, "instance", None):
        model = loaded.cfg.model_id[0] + ("b" if args.mode == "peak" else "a")
    return loaded.with_model(model) if model else loaded


def _print_table(df: pd.DataFrame) -> None:
    print(df.to_markdown(index=False))


def _finish(args, argv, loaded: Optional[LoadedInstance], opts: SolverOptions, artifacts: dict[str, Path]) -> None:
    options = {"command": args.command, **asdict(opts)}
    if loaded is not None:
        options["model"] = loaded.cfg.model_id
    write_manifest(
        args.out,
        command=list(argv),
        instance_name=loaded.name if loaded else "",
        instance_sha256=loaded.digest if loaded else "",
        options=options,
        seed=args.seed,
        artifacts=artifacts,
    )


# ---------------- Subcommands ----------------

def cmd_params(args, loaded: LoadedInstance, opts: SolverOptions) -> tuple[int, dict[str, Path]]:
    od = restrict(loaded.od, []) if args.demand == 0 else scale(loaded.od, args.demand)
    topo, cfg = loaded.topo, loaded.cfg
    dwell_block = loaded.document.topology.dwell
    policy = (
        DwellPolicy(tuple(dwell_block.thresholds), tuple(dwell_block.group_dwell))
        if dwell_block.thresholds is not None else None
    )

    records = []
    for s in topo.stations:
        crowd = compute_crowdedness(od, s.index)
        group = policy.group_of(crowd) if policy else s.dwell_group
        records.append({
            "station": s.index,
            "direction": topo.direction_of(s.index),
            "turnaround": "yes" if s.is_turnaround else "",
            "pure_run_s": topo.pure_run_time.get(s.index, 0.0),
            "full_run_s": topo.full_run_time(s.index) if s.index not in topo.first_stations else 0.0,
            "crowdedness": round(crowd, 3),
            "dwell_group": group,
            "dwell_s": policy.group_dwell[group] if policy else topo.dwell_time[s.index],
        })
    stations = pd.DataFrame(records)

    summary = []
    for direction in DIRECTIONS:
        try:
            window = site_intermediate_depots(od, direction=direction)
        except MetroTimetableError as exc:
            log.warning("depot siting (%s): %s", direction, exc)
            window = None
        summary.append({
            "direction": direction,
            "passengers": round(directional_total(od, direction), 3),
            "required_services": required_services(directional_total(od, direction), cfg.capacity, cfg.load_factor),
            "densest_window": f"{window[0]}-{window[1]}" if window else "n/a",
            "turnarounds": " ".join(str(t) for t in topo.turnarounds(direction)),
            "accel_penalty_s": topo.accel_penalty,
            "decel_penalty_s": topo.decel_penalty,
        })
    summary_df = pd.DataFrame(summary)

    _print_table(stations)
    print()
    _print_table(summary_df)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stations_csv = out / "params_stations.csv"
    summary_csv = out / "params_summary.csv"
    stations.to_csv(stations_csv, index=False, lineterminator="\n")
    summary_df.to_csv(summary_csv, index=False, lineterminator="\n")
    return 0, {"params_stations": stations_csv, "params_summary": summary_csv}


def cmd_build(args, loaded: LoadedInstance, opts: SolverOptions) -> tuple[int, dict[str, Path]]:
    _, instance = build_model(loaded.cfg, loaded.topo, loaded.od, f"{loaded.name}-{loaded.cfg.model_id}")
    summary = describe(instance)
    _print_table(summary)
    mps = write_mps(instance, Path(args.out) / f"{instance.name}.mps")
    summary_csv = Path(args.out) / "model_summary.csv"
    summary.to_csv(summary_csv, index=False, lineterminator="\n")
    return 0, {"mps": mps, "model_summary": summary_csv}


def cmd_export_mps(args, loaded: Optional[LoadedInstance], opts: SolverOptions) -> tuple[int, dict[str, Path]]:
    if args.from_mps:
        instance = read_mps(args.from_mps)
    else:
        _, instance = build_model(loaded.cfg, loaded.topo, loaded.od, f"{loaded.name}-{loaded.cfg.model_id}")
    mps = write_mps(instance, Path(args.out) / f"{instance.name}.mps")
    print(mps)
    return 0, {"mps": mps}


def cmd_solve(args, loaded: LoadedInstance, opts: SolverOptions) -> tuple[int, dict[str, Path]]:
    cfg, topo = loaded.cfg, loaded.topo
    _, instance = build_model(cfg, topo, loaded.od, f"{loaded.name}-{cfg.model_id}")
    solution = solve(instance, opts)
    out = Path(args.out)
    artifacts = {"solution": write_solution(solution, out / "solution.txt")}
    print(
        f"status={solution.status} objective={solution.objective} bound={solution.bound} "
        f"nodes={solution.nodes} wall_time={solution.wall_time:.2f}s"
    )
    if solution.has_incumbent:
        tt = timetable_from_solution(solution, cfg, topo)
        artifacts["timetable"] = write_timetable_csv(tt, out / "timetable.csv")
        violations = check_timetable(tt, topo, cfg)
        for v in violations:
            log.warning("timetable check %s: service %s station %s: %s", v.check, v.service, v.station, v.detail)
        up, down = len(tt.selected("up")), len(tt.selected("down"))
        print(f"services up={up} down={down} trains={len(tt.trains())} violations={len(violations)}")
    return exit_code(solution), artifacts


def cmd_simulate(args, loaded: LoadedInstance, opts: SolverOptions) -> tuple[int, dict[str, Path]]:
    def timetable_of(inst: LoadedInstance, csv: Optional[str]):
        if csv:
            return read_timetable_csv(csv, inst.topo.n)
        if inst.timetable is None:
            raise MissingParameter(f"timetable for {inst.name} (embed one or pass --timetable)")
        return inst.timetable

    if args.solution:
        tt = timetable_from_solution(read_solution(args.solution), loaded.cfg, loaded.topo)
    else:
        tt = timetable_of(loaded, args.timetable)
    trace = simulate(tt, loaded.od, loaded.cfg.capacity, loaded.cfg.initial_accumulation)
    out = Path(args.out)
    artifacts = {"trace": write_trace_csv(trace, out / "trace.csv")}
    stats = metrics(trace)
    finish = finish_time(tt)
    print(f"{loaded.name}: total waiting time {stats['total_waiting_time']:g}, finish time {finish:g}")
    print(
        f"  average wait {stats['average_waiting_time']:.3f}, stranded {stats['stranded']:g}, "
        f"peak load factor {stats['peak_load_factor']:.3f}, left-behind events {int(stats['left_behind_events'])}"
    )
    if args.baseline:
        base = _resolve(args.baseline, argparse.Namespace(**{**vars(args), "instance": None, "model": None}))
        base_tt = timetable_of(base, None)
        base_trace = simulate(base_tt, base.od, base.cfg.capacity, base.cfg.initial_accumulation)
        base_finish = finish_time(base_tt)
        print(f"{base.name}: total waiting time {total_waiting_time(base_trace):g}, finish time {base_finish:g}")
        print(f"waiting time reduction {reduction(total_waiting_time(base_trace), total_waiting_time(trace)):.2f}%")
        print(f"finish time reduction {reduction(base_finish, finish):.2f}%")
    return 0, artifacts


def cmd_pareto(args, loaded: LoadedInstance, opts: SolverOptions) -> tuple[int, dict[str, Path]]:
    if loaded.cfg.objective != "bi_objective":
        loaded = loaded.with_model("3" + loaded.cfg.model_id[1])
    epsilon = args.epsilon if args.epsilon is not None else loaded.epsilon
    points = sweep(loaded.cfg, loaded.topo, loaded.od, epsilon, opts, args.direction)
    frame = frontier_frame(points, loaded.name)
    _print_table(frame)
    path = Path(args.out) / "frontier.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return 0, {"frontier": path}


_COMMANDS = {
    "params": cmd_params,
    "build": cmd_build,
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "pareto": cmd_pareto,
    "export-mps": cmd_export_mps,
}


# ---------------- Public API ----------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        settings = with_overrides(
            load_settings(),
            time_limit=args.time_limit,
            engine=args.engine,
            log_level=args.log_level,
            seed=args.seed,
        )
        logging.basicConfig(
            level=getattr(logging, settings.log_level, logging.INFO),
            format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
            force=True,
        )
        opts = SolverOptions.from_settings(settings)

        if args.command == "fixture":
            target = Path(args.out)
            if target.suffix != ".json":
                target = target / f"{args.name}.json"
            doc = generate_fixture(args.name)
            path = write_instance(doc, target)
            write_manifest(
                path.parent,
                command=list(argv),
                instance_name=doc.name,
                instance_sha256=sha256_text(canonical_text(doc)),
                options={"command": "fixture"},
                seed=args.seed,
                artifacts={"fixture": path},
            )
            print(path)
            return 0

        needs_instance = not (args.command == "export-mps" and args.from_mps)
        loaded = _resolve(args.source, args) if needs_instance else None
        code, artifacts = _COMMANDS[args.command](args, loaded, opts)
        _finish(args, argv, loaded, opts, artifacts)
        return code
    except SchemaError as exc:
        print(f"schema error at {exc}", file=sys.stderr)
        return 1
    except (Infeasible, EmptyFrontier) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except TimeLimitReached as exc:
        print(f"time limit: {exc}", file=sys.stderr)
        return 3
    except MetroTimetableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
