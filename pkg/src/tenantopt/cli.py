"""Command line interface: ``tenantopt <command> [options]``.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import dispatch
from .builder import Scenario
from .domain import PolicyRuleSet, validate_scenario
from .engine import (
    SCENARIO_TABLE,
    ScenarioResult,
    ScenarioSpec,
    SweepAborted,
    run_cascading_mode,
    run_component_sweep,
    run_policy_comparison,
)
from .io import (
    ConfigError,
    ProfileError,
    ReportBundle,
    build_bundle,
    bundled_scenario_path,
    emit_report,
    format_cell,
    load_scenario_file,
    report_row,
    waterfall_rows,
)
from .kpi import Reference, build_report, case_emissions

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64

log = logging.getLogger("tenantopt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("capacities must be a non-empty list of non-negative numbers")
    return values


def _scenario_name(text: str) -> str:
    if text not in SCENARIO_TABLE:
        raise argparse.ArgumentTypeError(f"unknown scenario {text!r}; choose from {', '.join(SCENARIO_TABLE)}")
    return text


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (YAML); default: the bundled example")
    common.add_argument("--out", type=Path, help="output directory (overrides the scenario file)")
    common.add_argument("--dump-lp", type=Path, metavar="DIR", help="write every model as an LP file into DIR")
    common.add_argument("--time-limit", type=float, help="seconds per solve")
    common.add_argument("--workers", type=int, help="parallel solves")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="tenantopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check the scenario file and its profiles")
    p = sub.add_parser("solve", parents=[common], help="solve the listed scenarios against REF")
    p.add_argument("--scenario", type=_scenario_name, action="append", help="scenario name (repeatable)")
    p = sub.add_parser("sweep", parents=[common], help="CHP capacity sweep of one scenario")
    p.add_argument("--scenario", type=_scenario_name, required=True)
    p.add_argument("--chp-caps", type=_float_list, help="comma-separated capacities in kWel")
    p = sub.add_parser("compare-policy", parents=[common], help="solve the scenarios under two rule sets")
    p.add_argument("--vintages", default="2020,2021", help="two of 2020, 2021, none (default 2020,2021)")
    p = sub.add_parser("cascade", parents=[common], help="continuous CHP capacity built from small units")
    p.add_argument("--scenario", type=_scenario_name, default="CHP")
    p.add_argument("--units", type=int, required=True)
    p.add_argument("--min-load", type=float, default=4.0, help="kWel per unit (default 4)")
    p = sub.add_parser("kpi", parents=[common], help="KPIs of a saved design and dispatch")
    p.add_argument("dispatch_dir", type=Path, help="directory holding design.json and dispatch.csv")
    p.add_argument("--reference", type=Path, help="saved REF dispatch for the delta KPIs")
    return parser


def _load(args):
    path = args.config or bundled_scenario_path()
    sf = load_scenario_file(path)
    params = sf.params
    opts = params.solve_options
    if args.time_limit is not None:
        if not args.time_limit > 0:
            raise UsageError("--time-limit must be positive")
        opts = replace(opts, time_limit=args.time_limit)
    changes = {"solve_options": opts}
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        changes["workers"] = args.workers
    if args.dump_lp is not None:
        args.dump_lp.mkdir(parents=True, exist_ok=True)
        changes["dump_lp_dir"] = str(args.dump_lp)
    sf.params = replace(params, **changes)
    if args.out is not None:
        sf.output = args.out
    return sf


def _print_rows(bundle: ReportBundle, columns=("scenario", "chp_sweep_kWel", "best_flag", "status", "npv_EUR", "delta_npv_EUR")):
    print("  ".join(columns))
    for row in bundle.rows:
        print("  ".join(format_cell(row.get(c)) or "-" for c in columns))


def _save_dispatch(results: Sequence[ScenarioResult], out: Path) -> None:
    for res in results:
        rec = res.record
        if rec is not None and rec.design is not None:
            dispatch.save(rec.design, rec.schedule, out / "dispatch" / res.name)


def _failed(results: Sequence[ScenarioResult]) -> list[str]:
    return [res.name for res in results if res.record is None]


def _finish(results, sf, out, all_capacities=False) -> int:
    bundle = build_bundle(results, sf.dispatch_days, all_capacities=all_capacities)
    emit_report(bundle, out)
    _save_dispatch(results, out)
    _print_rows(bundle)
    failed = _failed(results)
    if failed:
        print(f"no feasible solution for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_validate(args) -> int:
    sf = _load(args)
    p = sf.params
    report = validate_scenario(sf.building, p.tech, p.econ, p.policy, p.emis)
    print(report)
    return EXIT_OK if report.passed else EXIT_INVALID


def _specs(names: Sequence[str]) -> list[ScenarioSpec]:
    names = list(dict.fromkeys(["REF", *names]))
    return [ScenarioSpec.named(n) for n in names]


def cmd_solve(args) -> int:
    sf = _load(args)
    results = run_component_sweep(_specs(args.scenario or sf.scenarios), sf.building, sf.params)
    return _finish(results, sf, sf.output)


def cmd_sweep(args) -> int:
    sf = _load(args)
    if args.chp_caps is not None:
        sf.params = replace(sf.params, chp_capacities=args.chp_caps)
    results = run_component_sweep(_specs([args.scenario]), sf.building, sf.params)
    return _finish(results, sf, sf.output, all_capacities=True)


def _vintage(text: str) -> PolicyRuleSet:
    if text.strip().lower() == "none":
        return PolicyRuleSet.tel2021().without_subsidies()
    try:
        return PolicyRuleSet.by_vintage(text.strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_compare_policy(args) -> int:
    parts = args.vintages.split(",")
    if len(parts) != 2:
        raise UsageError("--vintages takes exactly two comma-separated values")
    policies = (_vintage(parts[0]), _vintage(parts[1]))
    sf = _load(args)
    specs = _specs(sf.scenarios)
    pairs = run_policy_comparison(specs, policies, sf.building, sf.params)
    code = EXIT_OK
    for k, policy in enumerate(policies):
        results = [(pair.first, pair.second)[k] for pair in pairs]
        code = max(code, _finish(results, sf, sf.output / policy.vintage))
    keys = sorted({key for pair in pairs for key in pair.deltas})
    sf.output.mkdir(parents=True, exist_ok=True)
    with open(sf.output / "policy_deltas.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", *keys])
        for pair in pairs:
            w.writerow([pair.name, *(format_cell(pair.deltas.get(key)) for key in keys)])
    return code


def cmd_cascade(args) -> int:
    if args.units < 1:
        raise UsageError("--units must be >= 1")
    if "chp" not in SCENARIO_TABLE[args.scenario][0]:
        raise UsageError(f"scenario {args.scenario} has no CHP")
    sf = _load(args)
    result = run_cascading_mode(ScenarioSpec.named(args.scenario), args.units, sf.building, sf.params,
                                min_load=args.min_load)
    return _finish([result], sf, sf.output)


def cmd_kpi(args) -> int:
    sf = _load(args)
    p = sf.params
    design, schedule = dispatch.load(args.dispatch_dir)
    scn = Scenario(sf.building, p.tech, p.econ, p.policy, p.emis)
    reference = None
    if args.reference is not None:
        _, ref_schedule = dispatch.load(args.reference)
        ref_npv = float(dispatch_npv(args.reference))
        reference = Reference(ref_npv, case_emissions(ref_schedule, p.emis, p.tech, p.econ.horizon_years))
    name = schedule.meta.get("name", args.dispatch_dir.name)
    npv = float(dispatch_npv(args.dispatch_dir))
    report = build_report(name, design, schedule, scn, npv, reference, schedule.meta.get("status", ""),
                          float(schedule.meta.get("gap", 0.0)))
    cap = design.capacities.get("chp", 0.0)
    bundle = ReportBundle(rows=[report_row(report, cap, True)], waterfall=waterfall_rows(report, cap))
    emit_report(bundle, sf.output)
    _print_rows(bundle)
    return EXIT_OK


def dispatch_npv(directory: Path) -> float:
    """NPV stored alongside a saved dispatch."""
    doc = json.loads((Path(directory) / dispatch.DESIGN_FILE).read_text())
    try:
        return float(doc["meta"]["npv"])
    except KeyError:
        raise ConfigError(f"{directory}: saved dispatch carries no NPV") from None


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "compare-policy": cmd_compare_policy,
    "cascade": cmd_cascade,
    "kpi": cmd_kpi,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tenantopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ProfileError, ValueError) as exc:
        print(f"tenantopt: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SweepAborted as exc:
        print(f"tenantopt: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"tenantopt: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
