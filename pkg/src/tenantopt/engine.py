"""Scenario matrices, CHP capacity sweeps and comparative result tables."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .builder import ModelConfig, Scenario, TimeSlice, build_model
from .dispatch import DispatchSchedule, SystemDesign, extract
from .domain import Building, EconomicParams, EmissionParams, PolicyRuleSet, TechnologyParams
from .kpi import KpiReport, Reference, build_report, case_emissions
from .solver import INFEASIBLE, TIME_LIMIT, SolveOptions, solve, verify_feasibility

log = logging.getLogger(__name__)

BASE_TECHNOLOGIES = frozenset({"boiler", "heat_storage"})
DEFAULT_CHP_CAPACITIES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)

# name -> (additional technologies, EV mode)
SCENARIO_TABLE: dict[str, tuple[frozenset[str], str]] = {
    "REF": (frozenset(), "none"),
    "PV": (frozenset({"pv"}), "none"),
    "PV_BAT": (frozenset({"pv", "battery"}), "none"),
    "PV_HP": (frozenset({"pv", "hp"}), "none"),
    "CHP": (frozenset({"chp"}), "none"),
    "CHP_BAT": (frozenset({"chp", "battery"}), "none"),
    "CHP_HP": (frozenset({"chp", "hp"}), "none"),
    "PV_CHP": (frozenset({"pv", "chp"}), "none"),
    "PV_CHP_BAT": (frozenset({"pv", "chp", "battery"}), "none"),
    "COMBI": (frozenset({"pv", "chp", "hp", "battery"}), "none"),
    "COMBI_EV": (frozenset({"pv", "chp", "hp", "battery"}), "fixed"),
    "COMBI_EVopt": (frozenset({"pv", "chp", "hp", "battery"}), "optimized"),
}


class SweepAborted(RuntimeError):
    """The reference case could not be solved, so no scenario has a baseline."""


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    technologies: frozenset[str]
    ev_mode: str = "none"
    chp_mode: str = "sweep"
    cascade_unit_count: int = 1
    cascade_min_load: float = 4.0
    policy: PolicyRuleSet | None = None

    def __post_init__(self):
        object.__setattr__(self, "technologies", frozenset(self.technologies))

    @property
    def has_chp(self) -> bool:
        return "chp" in self.technologies

    @classmethod
    def named(cls, name: str, **changes) -> "ScenarioSpec":
        try:
            extra, ev = SCENARIO_TABLE[name]
        except KeyError:
            raise ValueError(f"unknown scenario {name!r}; known: {', '.join(SCENARIO_TABLE)}") from None
        return cls(name, BASE_TECHNOLOGIES | extra, ev, **changes)


@dataclass(frozen=True)
class SharedParams:
    tech: TechnologyParams = field(default_factory=TechnologyParams)
    econ: EconomicParams = field(default_factory=EconomicParams)
    policy: PolicyRuleSet = field(default_factory=PolicyRuleSet.tel2021)
    emis: EmissionParams = field(default_factory=EmissionParams)
    time_slice: TimeSlice = field(default_factory=TimeSlice.full_year)
    solve_options: SolveOptions = field(default_factory=SolveOptions)
    chp_capacities: tuple[float, ...] = DEFAULT_CHP_CAPACITIES
    workers: int = 1
    # directory receiving one LP file per solve, or None
    dump_lp_dir: str | None = None


@dataclass
class RunRecord:
    """One solve: a scenario at one CHP capacity."""

    name: str
    chp_capacity: float
    status: str
    npv: float
    gap: float
    bound: float
    runtime: float
    scenario: Scenario
    design: SystemDesign | None = None
    schedule: DispatchSchedule | None = None
    warning: str = ""
    max_violation: float = math.nan  # feasibility audit of the returned point

    @property
    def solved(self) -> bool:
        return self.status != INFEASIBLE


@dataclass
class SweepResult:
    name: str
    per_capacity: dict[float, RunRecord]
    best: float | None

    @property
    def best_record(self) -> RunRecord | None:
        return None if self.best is None else self.per_capacity[self.best]


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    sweep: SweepResult
    report: KpiReport | None
    reference: Reference | None = None

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def record(self) -> RunRecord | None:
        return self.sweep.best_record

    def capacity_reports(self) -> dict[float, KpiReport | None]:
        """KPI report of every sweep member, not only the best."""
        out = {}
        for cap, rec in self.sweep.per_capacity.items():
            single = SweepResult(self.name, {cap: rec}, cap if rec.solved else None)
            out[cap] = _report(self.spec, single, self.reference)
        return out


# ---------------------------------------------------------------------------
# single solves


def make_scenario(spec: ScenarioSpec, building: Building, params: SharedParams, chp_capacity: float = 0.0,
                  **config_changes) -> Scenario:
    config = ModelConfig(
        technologies=spec.technologies,
        chp_mode=spec.chp_mode,
        chp_capacity=chp_capacity if spec.has_chp else 0.0,
        cascade_unit_count=spec.cascade_unit_count,
        cascade_min_load=spec.cascade_min_load,
        ev_mode=spec.ev_mode,
        time_slice=params.time_slice,
        name=spec.name,
    )
    if config_changes:
        config = replace(config, **config_changes)
    return Scenario(building, params.tech, params.econ, spec.policy or params.policy, params.emis, config)


def run_scenario(scn: Scenario, opts: SolveOptions, chp_capacity: float = 0.0,
                 dump_lp_dir: str | None = None) -> RunRecord:
    """Build and solve one scenario in isolation."""
    bm = build_model(scn)
    if dump_lp_dir:
        bm.model.write_lp(Path(dump_lp_dir) / f"{scn.config.name}_chp{chp_capacity:g}.lp")
    sol = solve(bm.model, opts)
    rec = RunRecord(scn.config.name, chp_capacity, sol.status, sol.objective_value, sol.gap, sol.bound,
                    sol.runtime, scn)
    if sol.has_values:
        rec.design, rec.schedule = extract(bm, sol)
        audit = verify_feasibility(bm.model, sol)
        rec.max_violation = audit.max_violation
        if not audit.passed:
            log.error("%s at %g kWel fails the feasibility audit:\n%s", scn.config.name, chp_capacity, audit)
    if sol.status == TIME_LIMIT:
        rec.warning = f"time limit reached with gap {sol.gap:.2e}"
        log.warning("%s at %g kWel: %s", scn.config.name, chp_capacity, rec.warning)
    return rec


Job = tuple[Scenario, SolveOptions, float, "str | None"]


def _run_job(job: Job) -> RunRecord:
    return run_scenario(*job)


def _execute(jobs: list[Job], workers: int) -> list[RunRecord]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_job, jobs))


def select_best(records: Iterable[RunRecord]) -> float | None:
    """Capacity with the highest NPV among solved runs; ties go to the smaller capacity."""
    best = None
    for rec in sorted(records, key=lambda r: r.chp_capacity):
        if not rec.solved or not math.isfinite(rec.npv):
            continue
        if best is None or rec.npv > best.npv:
            best = rec
    return None if best is None else best.chp_capacity


def _capacities(spec: ScenarioSpec, params: SharedParams) -> tuple[float, ...]:
    return tuple(params.chp_capacities) if spec.has_chp and spec.chp_mode == "sweep" else (0.0,)


def _sweep_jobs(spec: ScenarioSpec, building: Building, params: SharedParams):
    return [(make_scenario(spec, building, params, cap), params.solve_options, cap, params.dump_lp_dir)
            for cap in _capacities(spec, params)]


def _assemble(spec: ScenarioSpec, records: list[RunRecord]) -> SweepResult:
    per = {r.chp_capacity: r for r in sorted(records, key=lambda r: r.chp_capacity)}
    return SweepResult(spec.name, per, select_best(per.values()))


def _report(spec: ScenarioSpec, sweep: SweepResult, reference: Reference | None) -> KpiReport | None:
    rec = sweep.best_record
    if rec is None:
        return None
    return build_report(spec.name, rec.design, rec.schedule, rec.scenario, rec.npv, reference, rec.status, rec.gap)


def _reference(sweep: SweepResult) -> Reference:
    rec = sweep.best_record
    if rec is None:
        raise SweepAborted("the REF case is infeasible; check the boiler capacity bound")
    scn = rec.scenario
    return Reference(rec.npv, case_emissions(rec.schedule, scn.emis, scn.tech, scn.econ.horizon_years))


def _run_specs(specs: Sequence[ScenarioSpec], building: Building, params: SharedParams,
               ref_spec: ScenarioSpec) -> tuple[SweepResult, list[tuple[ScenarioSpec, SweepResult]]]:
    """Solve the reference and every spec in one job batch."""
    all_specs = [ref_spec, *specs]
    jobs, owner = [], []
    for k, spec in enumerate(all_specs):
        for job in _sweep_jobs(spec, building, params):
            jobs.append(job)
            owner.append(k)
    records = _execute(jobs, params.workers)
    grouped: list[list[RunRecord]] = [[] for _ in all_specs]
    for k, rec in zip(owner, records):
        grouped[k].append(rec)
    sweeps = [_assemble(spec, recs) for spec, recs in zip(all_specs, grouped)]
    return sweeps[0], list(zip(specs, sweeps[1:]))


def _sort_key(res: ScenarioResult):
    delta = res.report.delta_npv if res.report and res.report.delta_npv is not None else -math.inf
    return (delta, res.name)


# ---------------------------------------------------------------------------
# analyses


def run_component_sweep(specs: Sequence[ScenarioSpec], building: Building, params: SharedParams) -> list[ScenarioResult]:
    """Solve every spec (CHP specs over all sweep capacities); results ascend by NPV gain over REF."""
    ref_specs = [s for s in specs if s.name == "REF"]
    if not ref_specs:
        raise ValueError("the REF scenario must be part of a component sweep")
    others = [s for s in specs if s.name != "REF"]
    ref_sweep, solved = _run_specs(others, building, params, ref_specs[0])
    reference = _reference(ref_sweep)
    results = [ScenarioResult(ref_specs[0], ref_sweep, _report(ref_specs[0], ref_sweep, reference), reference)]
    results += [ScenarioResult(spec, sweep, _report(spec, sweep, reference), reference) for spec, sweep in solved]
    return sorted(results, key=_sort_key)


def run_building_sweep(buildings: Sequence[Building], spec: ScenarioSpec, params: SharedParams) -> list[ScenarioResult]:
    """Best-of-sweep result of ``spec`` for each building, buildings in descending heat demand."""
    heat = [b.heat_demand.annual_sum for b in buildings]
    if any(b > a + 1e-9 for a, b in zip(heat, heat[1:])):
        raise ValueError("buildings must be ordered by descending annual heat demand")
    out = []
    for building in buildings:
        ref_sweep, solved = _run_specs([spec], building, params, ScenarioSpec.named("REF"))
        reference = _reference(ref_sweep)
        out.append(ScenarioResult(spec, solved[0][1], _report(spec, solved[0][1], reference), reference))
    return out


@dataclass
class PolicyPair:
    name: str
    first: ScenarioResult
    second: ScenarioResult
    deltas: dict[str, float | None]


def kpi_deltas(a: KpiReport | None, b: KpiReport | None) -> dict[str, float | None]:
    """Numeric KPI differences second minus first; None where either side is absent."""
    ra = a.to_record() if a else {}
    rb = b.to_record() if b else {}
    out: dict[str, float | None] = {}
    for key in set(ra) | set(rb):
        x, y = ra.get(key), rb.get(key)
        if isinstance(x, str) or isinstance(y, str) or key == "pv_scheme_index":
            continue
        out[key] = None if x is None or y is None else float(y) - float(x)
    return dict(sorted(out.items()))


def run_policy_comparison(
    specs: Sequence[ScenarioSpec],
    policies: tuple[PolicyRuleSet, PolicyRuleSet],
    building: Building,
    params: SharedParams,
) -> list[PolicyPair]:
    """Each spec solved under both rule sets, with KPI deltas (second minus first)."""
    runs = []
    for policy in policies:
        p = replace(params, policy=policy)
        tagged = [replace(s, policy=None) for s in specs if s.name != "REF"]
        ref_sweep, solved = _run_specs(tagged, building, p, ScenarioSpec.named("REF"))
        reference = _reference(ref_sweep)
        runs.append({spec.name: ScenarioResult(spec, sweep, _report(spec, sweep, reference), reference)
                     for spec, sweep in solved})
    pairs = []
    for spec in specs:
        if spec.name == "REF":
            continue
        a, b = runs[0][spec.name], runs[1][spec.name]
        pairs.append(PolicyPair(spec.name, a, b, kpi_deltas(a.report, b.report)))
    return pairs


def run_cascading_mode(
    spec: ScenarioSpec,
    unit_count: int,
    building: Building,
    params: SharedParams,
    min_load: float = 4.0,
    chp_capacity: float | None = None,
) -> ScenarioResult:
    """One solve with a continuous CHP capacity made of ``unit_count`` small units.

    The fixed CHP cost is paid once per unit and the minimum load is ``min_load``
    kWel. Passing ``chp_capacity`` pins the capacity.
    """
    if unit_count < 1:
        raise ValueError("unit_count must be >= 1")
    if not spec.has_chp:
        raise ValueError("cascading mode needs a CHP-bearing scenario")
    cascade = replace(spec, chp_mode="cascading", cascade_unit_count=unit_count, cascade_min_load=min_load)
    fixed = {"chp": float(chp_capacity)} if chp_capacity is not None else {}
    ref_job = (make_scenario(ScenarioSpec.named("REF"), building, params), params.solve_options, 0.0,
               params.dump_lp_dir)
    job = (make_scenario(cascade, building, params, fixed_capacities=fixed), params.solve_options, 0.0,
           params.dump_lp_dir)
    ref_rec, rec = _execute([ref_job, job], params.workers)
    ref_sweep = SweepResult("REF", {0.0: ref_rec}, select_best([ref_rec]))
    reference = _reference(ref_sweep)
    if rec.design is not None:
        rec.chp_capacity = rec.design.capacities["chp"]
    sweep = SweepResult(cascade.name, {rec.chp_capacity: rec}, select_best([rec]))
    return ScenarioResult(cascade, sweep, _report(cascade, sweep, reference), reference)


def battery_price_ladder(start: float = 530.0, stop: float = 100.0, step: float = 50.0) -> tuple[float, ...]:
    """Variable battery prices from ``start`` down to ``stop`` in ``step`` increments (both ends kept)."""
    prices = [start]
    p = math.floor(start / step) * step
    if p == start:
        p -= step
    while p > stop + 1e-9:
        prices.append(p)
        p -= step
    prices.append(stop)
    return tuple(prices)


def run_battery_price_sensitivity(
    spec: ScenarioSpec,
    building: Building,
    params: SharedParams,
    prices: Sequence[float] | None = None,
) -> list[tuple[float, ScenarioResult]]:
    """Re-run ``spec`` for each variable battery price in EUR/kWh."""
    out = []
    for price in prices if prices is not None else battery_price_ladder():
        p = replace(params, tech=params.tech.with_cost("battery", variable_investment=float(price)))
        ref_sweep, solved = _run_specs([spec], building, p, ScenarioSpec.named("REF"))
        reference = _reference(ref_sweep)
        sweep = solved[0][1]
        out.append((float(price), ScenarioResult(spec, sweep, _report(spec, sweep, reference), reference)))
    return out
