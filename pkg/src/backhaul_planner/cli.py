"""Operator command line: gen, derive, solve, check, oracle, report.

Exit codes: 0 success, 1 violations or enumeration refusal, 2 bad input.
Every command that writes artifacts also writes a run manifest carrying the
resolved configuration, seeds, and the sha256 of each output so a run can be
reproduced and verified bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__, oracle as oracle_mod, pareto
from .model import check_feasibility, solution_from_dict, solution_to_dict
from .scenario import (
    GenParams,
    LinkClassParams,
    RadioConfig,
    ScenarioFormatError,
    derive_tables,
    generate_scenario,
    load_scenario,
    load_tables,
    preset_gen_params,
    save_scenario,
    save_tables,
    scenario_hash,
)
from .tabu import SearchParams

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_BAD_INPUT = 2

FRONT_FIELDS = ["epsilon", "f1", "f2", "f3", "fc", "bound", "heuristic_bound", "solution_file"]


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_BAD_INPUT):
        super().__init__(message)
        self.code = code


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    directory: Path, command: str, info: dict, outputs: list[Path], started: float, name: str = "manifest.json"
) -> None:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "elapsed_s": round(time.time() - started, 3),
        "outputs": {p.name: _sha256(p) for p in outputs},
        **info,
    }
    path = directory / name
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config: {exc}")
    if not isinstance(data, dict):
        raise CliError("config must be a JSON object")
    return data


def _radio_from_dict(raw: dict) -> RadioConfig:
    raw = dict(raw)
    for key in ("access", "backhaul"):
        if key in raw and isinstance(raw[key], dict):
            raw[key] = LinkClassParams(**raw[key])
    try:
        return RadioConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad radio config: {exc}")


def _gen_params(args, config: dict) -> GenParams:
    params = preset_gen_params(args.preset) if args.preset else GenParams()
    overrides = dict(config.get("gen", {}))
    if "radio" in overrides:
        overrides["radio"] = _radio_from_dict(overrides["radio"])
    for key in ("ban_positions", "sbs_positions", "ma_positions"):
        if overrides.get(key) is not None:
            overrides[key] = tuple(tuple(p) for p in overrides[key])
    try:
        return dataclasses.replace(params, **overrides)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad gen config: {exc}")


def _solve_params(args, config: dict) -> pareto.SolveParams:
    search_over = dict(config.get("search", {}))
    if args.seed is not None:
        search_over["seed"] = args.seed
    try:
        search = SearchParams(**search_over)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad search config: {exc}")
    solve_over = dict(config.get("solve", {}))
    for flag in ("theta", "delta_c", "delta_eps", "restrict", "max_iterations"):
        value = getattr(args, flag, None)
        if value is not None:
            solve_over[flag] = value
    try:
        return pareto.SolveParams(search=search, **solve_over)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad solve config: {exc}")


def _read_scenario(path: str):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise CliError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"scenario is not valid JSON: {exc}")
    except ScenarioFormatError as exc:
        raise CliError(str(exc))


def _tables_for(scenario, scenario_path: str):
    sidecar = Path(str(scenario_path) + ".tables.json")
    if sidecar.exists():
        try:
            return load_tables(sidecar, scenario)
        except (ValueError, KeyError, TypeError):
            pass  # stale cache: re-derive
    return derive_tables(scenario)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    params = _gen_params(args, config)
    scenario = generate_scenario(params, args.seed or 0)
    out = Path(args.out or "scenario.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, out)
    _write_manifest(
        out.parent,
        "gen",
        {"seed": args.seed or 0, "scenario_hash": scenario_hash(scenario), "preset": args.preset},
        [out],
        started,
        name=out.name + ".manifest.json",
    )
    print(f"wrote {out} ({len(scenario.ban_sites)}/{len(scenario.sbs_sites)}/{len(scenario.ma_sites)} sites, "
          f"{scenario.n_machines} machines, {scenario.n_subareas} subareas)")
    return EXIT_OK


def cmd_derive(args) -> int:
    started = time.time()
    scenario = _read_scenario(args.scenario)
    tables = derive_tables(scenario)
    out = Path(args.out or (args.scenario + ".tables.json"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_tables(scenario, tables, out)
    _write_manifest(
        out.parent,
        "derive",
        {"scenario_hash": scenario_hash(scenario)},
        [out],
        started,
        name=out.name + ".manifest.json",
    )
    print(f"wrote {out} (anchor radius {tables.ban_radius_m:.2f} m, station radius {tables.sbs_radius_m:.2f} m)")
    return EXIT_OK


def _bound_by_eps(bounds) -> dict:
    return {rec.epsilon: rec for rec in bounds}


def _write_front_csv(path: Path, front, bounds, solution_files) -> None:
    lookup = _bound_by_eps(bounds)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRONT_FIELDS)
        for entry, fname in zip(front, solution_files):
            rec = lookup.get(entry.epsilon)
            writer.writerow(
                [
                    entry.epsilon,
                    entry.objectives.cost,
                    entry.objectives.uncovered_subareas,
                    entry.objectives.uncovered_machines,
                    entry.objectives.weighted_uncovered,
                    rec.bound if rec else "",
                    (str(rec.heuristic).lower() if rec else ""),
                    fname,
                ]
            )


def cmd_solve(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    params = _solve_params(args, config)
    scenario = _read_scenario(args.scenario)
    tables = _tables_for(scenario, args.scenario)
    out_dir = Path(args.out or "solve-out")
    out_dir.mkdir(parents=True, exist_ok=True)

    result = pareto.solve(scenario, tables, params=params)
    theta = params.theta if params.theta is not None else scenario.radio.mtc_weight

    sol_dir = out_dir / "solutions"
    sol_dir.mkdir(exist_ok=True)
    outputs = []
    solution_files = []
    for n, entry in enumerate(result.front):
        fname = f"solutions/solution_{n:03d}.json"
        path = out_dir / fname
        path.write_text(json.dumps(solution_to_dict(entry.solution, scenario, theta), indent=1, sort_keys=True) + "\n")
        solution_files.append(fname)
        outputs.append(path)

    front_csv = out_dir / "front.csv"
    _write_front_csv(front_csv, result.front, result.bounds, solution_files)
    outputs.append(front_csv)

    bounds_csv = out_dir / "bounds.csv"
    with bounds_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "bound", "heuristic_bound"])
        for rec in result.bounds:
            writer.writerow([rec.epsilon, rec.bound, str(rec.heuristic).lower()])
    outputs.append(bounds_csv)

    if args.trace:
        trace_csv = out_dir / "multiplier_trace.csv"
        with trace_csv.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "round", "epsilon", "relaxed_value", "max_multiplier", "violation_norm"])
            writer.writerows(result.multiplier_trace)
        outputs.append(trace_csv)

    _write_manifest(
        out_dir,
        "solve",
        {
            "scenario_hash": scenario_hash(scenario),
            "seed": params.search.seed,
            "config": {
                "solve": {k: v for k, v in dataclasses.asdict(params).items() if k != "search"},
                "search": dataclasses.asdict(params.search),
            },
        },
        outputs,
        started,
    )
    print(f"front: {len(result.front)} entries over {len(result.epsilons)} budget iterations -> {out_dir}")
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = _read_scenario(args.scenario)
    tables = _tables_for(scenario, args.scenario)
    try:
        data = json.loads(Path(args.solution).read_text())
        solution = solution_from_dict(data, scenario)
    except FileNotFoundError:
        raise CliError(f"solution file not found: {args.solution}")
    except (json.JSONDecodeError, KeyError, ValueError, IndexError) as exc:
        raise CliError(f"bad solution file: {exc}")
    violations = check_feasibility(solution, scenario, tables, budget=args.budget)
    if not violations:
        print("feasible: no violations")
        return EXIT_OK
    for v in violations:
        print(f"{v.code} {v.subject}: {v.detail}")
    print(f"{len(violations)} violation(s)")
    return EXIT_VIOLATION


def cmd_oracle(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    params = _solve_params(args, config)
    scenario = _read_scenario(args.scenario)
    tables = _tables_for(scenario, args.scenario)
    out_dir = Path(args.out or "oracle-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    theta = params.theta if params.theta is not None else scenario.radio.mtc_weight

    exact = oracle_mod.exact_front(scenario, tables, theta)
    result = pareto.solve(scenario, tables, params=params)
    heuristic = [(e.objectives.cost, e.objectives.weighted_uncovered) for e in result.front]

    oracle_csv = out_dir / "oracle_front.csv"
    with oracle_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRONT_FIELDS)
        for cost_val, fc in exact:
            writer.writerow(["", cost_val, "", "", fc, "", "false", ""])

    heuristic_csv = out_dir / "front.csv"
    _write_front_csv(heuristic_csv, result.front, result.bounds, [""] * len(result.front))

    diff_csv = out_dir / "oracle_diff.csv"
    matches = 0
    with diff_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f1", "fc", "status", "heuristic_best_fc"])
        for cost_val, fc in exact:
            within = [h_fc for h_cost, h_fc in heuristic if h_cost <= cost_val + 1e-9]
            best = min(within) if within else None
            if any(abs(h_cost - cost_val) <= 1e-9 and abs(h_fc - fc) <= 1e-9 for h_cost, h_fc in heuristic):
                status = "match"
                matches += 1
            elif best is None:
                status = "missed"
            else:
                status = "dominated"
            writer.writerow([cost_val, fc, status, "" if best is None else best])

    _write_manifest(
        out_dir,
        "oracle",
        {"scenario_hash": scenario_hash(scenario), "seed": params.search.seed, "source": "oracle"},
        [oracle_csv, heuristic_csv, diff_csv],
        started,
    )
    print(f"oracle front: {len(exact)} points, heuristic matches {matches}/{len(exact)} -> {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.time()
    out_dir = Path(args.out or ".")
    front_csv = out_dir / "front.csv"
    bounds_csv = out_dir / "bounds.csv"
    if not front_csv.exists():
        raise CliError(f"missing front file: {front_csv}")
    if not bounds_csv.exists():
        raise CliError(f"missing bound file: {bounds_csv}")
    with front_csv.open() as fh:
        front_rows = list(csv.DictReader(fh))
    with bounds_csv.open() as fh:
        bound_rows = list(csv.DictReader(fh))

    points = [(float(r["f1"]), float(r["fc"])) for r in front_rows]
    gap_rows = []
    skipped = []
    for r in bound_rows:
        eps, bound = float(r["epsilon"]), float(r["bound"])
        feasible = [fc for f1, fc in points if f1 <= eps + 1e-9]
        if not feasible or bound <= 0:
            skipped.append(eps)
            continue
        best = min(feasible)
        gap_rows.append((eps, best, bound, best / bound, r["heuristic_bound"]))

    gap_csv = out_dir / "gap_table.csv"
    with gap_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "best_fc", "bound", "ratio", "heuristic_bound"])
        writer.writerows(gap_rows)

    plot_csv = out_dir / "plot_data.csv"
    with plot_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "x", "y"])
        for f1, fc in sorted(points):
            writer.writerow(["solution", f1, fc])
        for r in bound_rows:
            writer.writerow(["bound", float(r["epsilon"]), float(r["bound"])])

    _write_manifest(
        out_dir, "report", {"skipped_epsilons": skipped}, [gap_csv, plot_csv], started,
        name="report_manifest.json",
    )
    if gap_rows:
        max_ratio = max(r[3] for r in gap_rows)
        flagged = " (heuristic bounds)" if any(r[4] == "true" for r in gap_rows) else ""
        print(f"max ratio best_fc/bound = {max_ratio:.4f}{flagged} over {len(gap_rows)} budgets")
    else:
        print("no budgets with positive bounds and feasible solutions")
    if skipped:
        print(f"skipped {len(skipped)} budget(s) without positive bound or feasible entry")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backhaul-planner", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_arg=True):
        if scenario_arg:
            p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON file with gen/solve/search overrides")
        p.add_argument("--out", default=None)

    p = sub.add_parser("gen", help="generate a scenario file")
    common(p, scenario_arg=False)
    p.add_argument("--preset", default=None, choices=["paper-fig2"])
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("derive", help="precompute tables for a scenario")
    common(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("solve", help="run the budget sweep")
    common(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--delta-c", dest="delta_c", type=float, default=None)
    p.add_argument("--delta-eps", dest="delta_eps", type=float, default=None)
    p.add_argument("--restrict", default=None, choices=list(pareto.RESTRICTIONS))
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=None)
    p.add_argument("--trace", action="store_true", help="write the multiplier trace CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="check a solution file against a scenario")
    common(p)
    p.add_argument("solution", help="solution JSON file")
    p.add_argument("--budget", type=float, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="exact front for a tiny scenario plus a diff vs the solver")
    common(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--delta-c", dest="delta_c", type=float, default=None)
    p.add_argument("--delta-eps", dest="delta_eps", type=float, default=None)
    p.add_argument("--restrict", default=None, choices=list(pareto.RESTRICTIONS))
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="gap table and plot data from solve outputs")
    p.add_argument("--out", default=None, help="directory holding front.csv and bounds.csv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except oracle_mod.OracleLimitError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
