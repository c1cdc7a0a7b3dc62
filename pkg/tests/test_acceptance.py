"""Acceptance criteria, each at its stated tolerance.

The terminal summary prints one PASS/FAIL line per criterion (see conftest.py).

Design-space solves (criterion 10) run on four representative weeks with annual
scaling instead of the full year: on one core even the 4-week CHP models keep
gaps well above 1e-4 after half a minute, and the full year is 13 times larger.
Each solve gets a time limit
(TENANTOPT_ACCEPTANCE_TIME_LIMIT seconds, default 20). Orderings between runs that
stopped on the limit are certified with dual bounds: "A >= B" holds when the best
incumbent of A is at least the best upper bound over every run of B, so a time
limit can never produce a false PASS.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest

from tenantopt.builder import TimeSlice, build_model
from tenantopt.cli import main
from tenantopt.domain import EconomicParams, EmissionParams, HourlyProfile, PolicyRuleSet, TechnologyParams
from tenantopt.engine import (
    SCENARIO_TABLE,
    ScenarioSpec,
    SharedParams,
    make_scenario,
    run_battery_price_sensitivity,
    run_component_sweep,
    run_policy_comparison,
)
from tenantopt.kpi import chp_emission_factor, compute_abatement_cost, compute_self_consumption
from tenantopt.dispatch import DispatchSchedule
from tenantopt.oracle import brute_force_dispatch, make_toy_instance
from tenantopt.remuneration import blended_tariff, build_price_book, build_pv_scheme_table, chp_per_kwh_earnings
from tenantopt.solver import OPTIMAL, SolveOptions, solve, verify_feasibility

from reference_values import (
    CHP_EARNINGS,
    CHP_EARNINGS_COP,
    CHP_EARNINGS_TENANT_PRICE,
    CHP_EMISSION_FACTOR,
    CONSUMER_PRICES,
    PV_SCHEME_TABLE_2021,
)

criterion = pytest.mark.criterion

TIME_LIMIT = float(os.environ.get("TENANTOPT_ACCEPTANCE_TIME_LIMIT", "20"))
CHP_CAPACITIES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)
WEEKS = SharedParams(
    time_slice=TimeSlice.representative_weeks(4),
    solve_options=SolveOptions(relative_gap=1e-4, time_limit=TIME_LIMIT, threads=1, seed=0),
    chp_capacities=CHP_CAPACITIES,
    workers=1,  # time limits are wall clock; parallel solves on one core would starve each other
)
SMALL = SharedParams(time_slice=TimeSlice.first_hours(48, 8760 / 48), solve_options=SolveOptions(relative_gap=0.0),
                     chp_capacities=(0.0, 10.0))


def best_incumbent(result):
    return result.record.npv


def best_bound(result):
    """Upper bound on the best NPV over the whole capacity sweep."""
    return max(rec.bound for rec in result.sweep.per_capacity.values() if rec.solved)


def certified_at_least(a, b, tol=1e-6):
    return best_incumbent(a) >= best_bound(b) - tol


# ---------------------------------------------------------------------------
# shared solves


@pytest.fixture(scope="module")
def components(building1):
    res = run_component_sweep([ScenarioSpec.named(n) for n in ("REF", "PV", "CHP", "COMBI")], building1, WEEKS)
    return {r.name: r for r in res}


@pytest.fixture(scope="module")
def battery_runs(building1):
    return dict(run_battery_price_sensitivity(ScenarioSpec.named("PV_BAT"), building1, WEEKS, prices=(530.0, 100.0)))


@pytest.fixture(scope="module")
def policy_pairs(building1):
    specs = [ScenarioSpec.named(n) for n in ("REF", "PV", "CHP")]
    policies = (PolicyRuleSet.tel2021().without_subsidies(), PolicyRuleSet.tel2021())
    return run_policy_comparison(specs, policies, building1, WEEKS)


@pytest.fixture(scope="module")
def no_heat(building1):
    # capacities beyond 10 kWel only repeat the zero-heat argument at several minutes per solve
    building = replace(building1, heat_demand=HourlyProfile(np.zeros(8760), "kWh"))
    params = replace(WEEKS, chp_capacities=(0.0, 10.0))
    return {r.name: r for r in run_component_sweep([ScenarioSpec.named("REF"), ScenarioSpec.named("COMBI")],
                                                   building, params)}


@pytest.fixture(scope="module")
def small_matrix(building1):
    return {r.name: r for r in run_component_sweep([ScenarioSpec.named(n) for n in SCENARIO_TABLE],
                                                   building1, SMALL)}


# ---------------------------------------------------------------------------
# 1-5: remuneration, prices, emission factor


@criterion(1, "blended PV feed-in at 50 kWp is 8.03 ct/kWh")
def test_c01_blended_feed_in():
    t0 = time.perf_counter()
    value = blended_tariff(PolicyRuleSet.tel2021().pv_tiers, 50.0)
    elapsed = time.perf_counter() - t0
    assert value == pytest.approx(0.0803, abs=0.00005)
    assert elapsed < 1.0


@criterion(2, "all 19 PV remuneration schemes reproduced")
def test_c02_scheme_table():
    table = build_pv_scheme_table(PolicyRuleSet.tel2021())
    assert len(table) == len(PV_SCHEME_TABLE_2021) == 19
    for scheme, (limit, scp, feed_in) in zip(table, PV_SCHEME_TABLE_2021):
        assert scheme.capacity_upper_limit == limit
        assert scheme.scp == pytest.approx(scp, abs=0.00005)
        assert scheme.feed_in == pytest.approx(feed_in, abs=0.00005)


@criterion(3, "CHP earnings per kWh for feed-in, tenant and heat pump use")
@pytest.mark.parametrize("mode", ["feedIn", "tenant", "heatPump"])
def test_c03_chp_earnings(mode):
    econ = EconomicParams(tenant_price=CHP_EARNINGS_TENANT_PRICE)
    value = chp_per_kwh_earnings(mode, econ, PolicyRuleSet.tel2021(), TechnologyParams(), CHP_EARNINGS_COP)
    assert value == pytest.approx(CHP_EARNINGS[mode], abs=0.0002)


@criterion(4, "CHP emission factor 313 g/kWh, footnote parameters within 2 g")
def test_c04_chp_emission_factor():
    emis, tech = EmissionParams(), TechnologyParams()
    base = chp_emission_factor(emis, tech)
    assert base == pytest.approx(CHP_EMISSION_FACTOR, abs=2.0)
    alt = chp_emission_factor(replace(emis, alt_thermal_efficiency=0.92, alt_electric_efficiency=0.455), tech)
    assert abs(alt - base) <= 2.0


@criterion(5, "landlord and gas price sequences 2021-2040")
def test_c05_price_book():
    book = build_price_book(EconomicParams(), EmissionParams())
    assert [int(y) for y in book.years] == list(range(2021, 2041))
    for k, year in enumerate(book.years):
        landlord, _, gas, _ = CONSUMER_PRICES[int(year)]
        assert book.landlord_grid_price[k] == pytest.approx(landlord, abs=0.0005)
        assert book.gas_price[k] == pytest.approx(gas, abs=0.0005)


# ---------------------------------------------------------------------------
# 6-7: KPI identities


def _reports(*groups):
    for group in groups:
        for res in group:
            if res.report is not None:
                yield res.report


@criterion(6, "DA = DSS / SCR on every solved scenario; 21 % / 70 % gives 30 %")
def test_c06_autonomy_spot_value():
    d = DispatchSchedule(np.arange(1), np.ones(1), {"pv_te": np.array([21.0]), "pv_grid": np.array([9.0])},
                         np.array([100.0]), np.zeros(1), np.zeros(1), np.ones(1), np.zeros(1))
    scr, dss, da = compute_self_consumption(d)
    assert (scr, dss) == pytest.approx((0.70, 0.21))
    assert da == pytest.approx(0.30, abs=1e-9)


@criterion(6, "DA = DSS / SCR on every solved scenario; 21 % / 70 % gives 30 %")
def test_c06_identity_on_small_matrix(small_matrix):
    checked = 0
    for rep in _reports(small_matrix.values()):
        if rep.scr:
            assert rep.da == pytest.approx(rep.dss / rep.scr, abs=1e-9)
            checked += 1
    assert checked >= 10


@pytest.mark.slow
@criterion(6, "DA = DSS / SCR on every solved scenario; 21 % / 70 % gives 30 %")
def test_c06_identity_on_design_runs(components, battery_runs, policy_pairs, no_heat):
    groups = [components.values(), battery_runs.values(), no_heat.values(),
              [r for pair in policy_pairs for r in (pair.first, pair.second)]]
    for rep in _reports(*groups):
        if rep.scr:
            assert rep.da == pytest.approx(rep.dss / rep.scr, abs=1e-9)


@criterion(7, "abatement cost from published quantities is 147.5 EUR/t")
def test_c07_abatement_cost():
    assert compute_abatement_cost(16_400.0, 111.4, 0.2) == pytest.approx(147.5, abs=1.0)


# ---------------------------------------------------------------------------
# 8: oracle


@criterion(8, "MILP matches brute force on seeded 24-hour boiler + CHP instances")
def test_c08_oracle_equivalence():
    t0 = time.perf_counter()
    for seed in range(6):
        inst = make_toy_instance(seed)
        assert inst.hours == 24 and inst.chp_capacity <= 10.0
        bm = build_model(inst.scenario)
        sol = solve(bm.model, SolveOptions(relative_gap=0.0))
        assert sol.status == OPTIMAL
        ref = brute_force_dispatch(inst.scenario, inst.hours, inst.chp_capacity, inst.boiler_capacity)
        # integer data: the enumeration grid contains an optimum, so the slack is zero
        assert sol.objective_value == pytest.approx(ref.npv, abs=1e-6, rel=1e-12)
    assert time.perf_counter() - t0 < 300


# ---------------------------------------------------------------------------
# 9: feasibility audit


def _assert_audited(records):
    n = 0
    for rec in records:
        if rec.solved:
            assert rec.max_violation < 1e-6, (rec.name, rec.chp_capacity, rec.max_violation)
            n += 1
    return n


@criterion(9, "every solve passes the audit; injected violations are detected")
def test_c09_small_matrix_audited(small_matrix):
    records = [rec for res in small_matrix.values() for rec in res.sweep.per_capacity.values()]
    assert _assert_audited(records) == len(records)


@pytest.mark.slow
@criterion(9, "every solve passes the audit; injected violations are detected")
def test_c09_design_runs_audited(components, battery_runs, policy_pairs, no_heat):
    results = [*components.values(), *battery_runs.values(), *no_heat.values(),
               *(r for pair in policy_pairs for r in (pair.first, pair.second))]
    assert _assert_audited(rec for res in results for rec in res.sweep.per_capacity.values()) > 0


def _solved(building, name, chp=0.0, **changes):
    bm = build_model(make_scenario(ScenarioSpec.named(name), building, SMALL, chp, **changes))
    sol = solve(bm.model, SolveOptions(relative_gap=0.0))
    assert verify_feasibility(bm.model, sol).passed
    return bm, sol


@criterion(9, "every solve passes the audit; injected violations are detected")
def test_c09_perturbations(building1):
    bm, sol = _solved(building1, "PV")
    x = sol.x.copy()
    x[bm.v["bin_pv"]] = 0.0
    x[bm.v["bin_pv"][[0, 3]]] = 1.0
    assert "pv_scheme_uniqueness" in verify_feasibility(bm.model, x).names()

    bm, sol = _solved(building1, "CHP_HP", chp=10.0)
    x = sol.x.copy()
    x[bm.v["chp_on"][5]] = 1.0
    x[bm.v["chp_el"][5]] = 1.0
    assert "chp_semicontinuity[5]" in verify_feasibility(bm.model, x).names()
    x = sol.x.copy()
    x[bm.v["chp_te"]] += 10.0
    assert "chp_fullload_cap" in verify_feasibility(bm.model, x).names()

    bm, sol = _solved(building1, "CHP_HP", chp_mode="cascading", cascade_unit_count=2)
    x = sol.x.copy()
    x[bm.v["cap_chp"]] = 20.0
    x[bm.v["bin_chp_levy"]] = 0.0
    assert "chp_levy_capacity" in verify_feasibility(bm.model, x).names()
    x = sol.x.copy()
    x[bm.v["chp_hp"]] += 5000.0 / 48
    x[bm.v["bin_chp_levy"]] = 0.0
    x[bm.v["chp_levy"]] = 0.0
    assert "chp_levy_energy" in verify_feasibility(bm.model, x).names()


# ---------------------------------------------------------------------------
# 10: qualitative replication on the bundled building

C10 = ("(a) COMBI >= CHP >= PV; (b) battery only when cheap; (c) subsidies never lower NPV; "
       "(d) no heat, no CHP or HP")


@pytest.mark.slow
@criterion(10, C10)
def test_c10a_component_ordering(components):
    combi, chp, pv = components["COMBI"], components["CHP"], components["PV"]
    assert combi.report.delta_npv >= chp.report.delta_npv >= pv.report.delta_npv
    # the same REF underlies every delta, so NPV bounds certify the deltas
    assert certified_at_least(combi, chp)
    assert certified_at_least(chp, pv)


@pytest.mark.slow
@criterion(10, C10)
def test_c10b_battery_price(battery_runs):
    dear, cheap = battery_runs[530.0].record, battery_runs[100.0].record
    assert dear.design.capacities["battery"] == 0.0
    assert cheap.design.capacities["battery"] > 0.0


@pytest.mark.slow
@criterion(10, C10)
def test_c10c_subsidies(policy_pairs):
    assert {p.name for p in policy_pairs} == {"PV", "CHP"}
    for pair in policy_pairs:
        assert pair.second.record.npv >= pair.first.record.npv
        assert certified_at_least(pair.second, pair.first), pair.name


@pytest.mark.slow
@criterion(10, C10)
def test_c10d_no_heat(no_heat):
    rec = no_heat["COMBI"].record
    assert rec.design.capacities["chp"] == 0.0
    assert rec.design.capacities["hp"] == 0.0
    for r in no_heat["COMBI"].sweep.per_capacity.values():
        assert r.design.capacities["hp"] == 0.0


# ---------------------------------------------------------------------------
# 11: determinism

DETERMINISM_CONFIG = """\
building: {name: building-1}
scenarios: [CHP]
chp_capacities: [0, 10, 20]
time_slice: {kind: first_hours, count: 72}
solver: {relative_gap: 0.0, threads: 1, seed: 7, time_limit: 120}
output: out
"""


@criterion(11, "repeated sweeps write byte-identical results.csv")
def test_c11_determinism(tmp_path):
    cfg = tmp_path / "scenario.yaml"
    cfg.write_text(DETERMINISM_CONFIG)
    outs = [tmp_path / "first", tmp_path / "second"]
    for out in outs:
        assert main(["sweep", "--config", str(cfg), "--scenario", "CHP", "--out", str(out), "--workers", "1"]) == 0
    first = (outs[0] / "results.csv").read_bytes()
    assert first == (outs[1] / "results.csv").read_bytes()
    assert first.count(b"\n") == 5  # header, REF, three capacities
