from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenantopt.builder import (
    CASH_FLOW_CATEGORIES,
    ModelConfig,
    Scenario,
    TimeSlice,
    build_model,
    capacity_upper_bounds,
    discounted_investment,
    investment_factor,
)
from tenantopt.domain import EconomicParams, PolicyRuleSet, TechCost
from tenantopt.oracle import unit_values
from tenantopt.solver import OPTIMAL, SolveOptions, solve, verify_feasibility

ECON = EconomicParams()
EXACT = SolveOptions(relative_gap=0.0)


# ---------------------------------------------------------------------------
# investment


@pytest.mark.parametrize(
    "lifetime, expected",
    [
        # bought in year 0 and 15, two thirds of the second unit left in year 20
        (15, 1 + 1.04**-15 - (10 / 15) * 1.04**-20),
        (20, 1.0),
        (10, 1 + 1.04**-10),
        (25, 1 - (5 / 25) * 1.04**-20),
    ],
)
def test_investment_factor_hand_values(lifetime, expected):
    assert investment_factor(TechCost(0, 1, 0, lifetime), ECON) == pytest.approx(expected, abs=1e-12)


def test_investment_factor_numbers():
    assert investment_factor(TechCost(0, 1, 0, 15), ECON) == pytest.approx(1.251007, abs=1e-6)
    assert investment_factor(TechCost(0, 1, 0, 25), ECON) == pytest.approx(0.908723, abs=1e-6)


def test_investment_factor_with_price_change():
    # 2 % price rise on the replacement bought in year 10
    f = investment_factor(TechCost(0, 1, 0, 10, 0.02), ECON)
    assert f == pytest.approx(1 + 1.02**10 / 1.04**10, abs=1e-12)


def test_discounted_investment_fixed_paid_once():
    cost = TechCost(15000.0, 970.30, 29.1, 15)
    f = investment_factor(cost, ECON)
    assert discounted_investment(cost, 10.0, ECON) == pytest.approx(15000.0 + 9703.0 * f)
    assert discounted_investment(cost, 0.0, ECON) == 0.0
    assert discounted_investment(cost, 0.0, ECON, built=True) == 15000.0
    with pytest.raises(ValueError):
        discounted_investment(cost, -1.0, ECON)
    with pytest.raises(ValueError):
        investment_factor(TechCost(0, 1, 0, 0), ECON)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(1, 30), st.floats(0.0, 0.1))
def test_investment_factor_bounds(lifetime, horizon, rate):
    econ = replace(ECON, horizon_years=horizon, discount_rate=rate)
    f = investment_factor(TechCost(0, 1, 0, lifetime), econ)
    # at least the share of the first unit used up, at most one full unit per purchase
    used = min(lifetime, horizon) / lifetime
    assert f >= used * (1 + rate) ** -horizon - 1e-12
    assert f <= -(-horizon // lifetime) + 1e-12


# ---------------------------------------------------------------------------
# structure and coefficients


def test_time_slices():
    weeks = TimeSlice.representative_weeks(4)
    assert weeks.length == 672
    assert weeks.weight == pytest.approx(8760 / 672)
    assert weeks.block_ranges() == [(0, 168), (168, 336), (336, 504), (504, 672)]
    assert all(h % 168 == 0 for h in weeks.hours[::168])
    assert TimeSlice.full_year().length == 8760
    with pytest.raises(ValueError):
        TimeSlice(())
    with pytest.raises(ValueError):
        TimeSlice((1, 2), blocks=(3,))
    with pytest.raises(ValueError):
        TimeSlice.representative_weeks(0)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(chp_mode="stacked")
    with pytest.raises(ValueError):
        ModelConfig(technologies={"fusion"})
    with pytest.raises(ValueError):
        ModelConfig(chp_capacity=-1)
    assert not ModelConfig().is_tenant_electricity
    assert ModelConfig(technologies={"pv"}).is_tenant_electricity
    assert ModelConfig(technologies={"chp"}).is_tenant_electricity


def test_disabled_technologies_have_zero_bounds(make_scn):
    ub = capacity_upper_bounds(make_scn())
    assert ub["pv"] == ub["chp"] == ub["hp"] == ub["battery"] == ub["inverter"] == 0
    assert ub["boiler"] > 0


def test_pv_bound_from_roof(make_scn):
    ub = capacity_upper_bounds(make_scn(("pv", "boiler")))
    # 176 m2 * 0.167 kWp/m2
    assert ub["pv"] == pytest.approx(29.392)


def test_model_audit_clean(make_scn):
    for techs in [("boiler",), ("pv", "chp", "hp", "battery", "boiler", "heat_storage")]:
        bm = build_model(make_scn(techs, chp=20.0))
        assert bm.model.audit() == []


def _coef(bm, name, t=0):
    return bm.model.objective[bm.v[name].ravel()[t]]


def test_objective_coefficients_against_independent_prices(make_scn):
    scn = make_scn(("pv", "chp", "hp", "battery", "boiler", "heat_storage"), chp=20.0)
    bm = build_model(scn)
    uv = unit_values(scn)
    w = 8760 / 48
    pol, tech = scn.policy, scn.tech
    assert _coef(bm, "grid_ll") == pytest.approx(-w * uv.c_ll)
    assert _coef(bm, "grid_te") == pytest.approx(w * uv.c_te)
    assert _coef(bm, "pv_te") == pytest.approx(w * (uv.c_te - uv.fee))
    assert _coef(bm, "chp_te") == pytest.approx(w * (uv.c_te - uv.fee + pol.chp_scp * uv.annuity))
    assert _coef(bm, "chp_te_wo") == pytest.approx(w * (uv.c_te - uv.fee))
    assert _coef(bm, "chp_grid") == pytest.approx(w * pol.chp_feed_in * uv.annuity)
    assert _coef(bm, "chp_grid_wo") == 0.0
    assert _coef(bm, "chp_el") == pytest.approx(-w * uv.gas / tech.chp_el_efficiency)
    assert _coef(bm, "q_boiler") == pytest.approx(-w * uv.gas / tech.boiler_efficiency)
    cost = tech.cost("battery")
    assert _coef(bm, "cap_battery") == pytest.approx(-cost.variable_investment * investment_factor(cost, scn.econ))
    assert _coef(bm, "bin_fix_chp") == -tech.cost("chp").fixed_investment


def test_grid_resale_only_with_tenant_electricity(make_scn):
    bm = build_model(make_scn())
    assert _coef(bm, "grid_te") == 0.0
    assert _coef(bm, "grid_ll") < 0


def test_cascading_multiplies_fixed_cost(make_scn):
    bm = build_model(make_scn(("chp", "boiler"), chp_mode="cascading", cascade_unit_count=3))
    assert _coef(bm, "bin_fix_chp") == -3 * 15000.0


def test_sweep_pins_chp_capacity(make_scn):
    bm = build_model(make_scn(("chp", "boiler"), chp=30.0))
    j = int(bm.v["cap_chp"])
    assert bm.model.lb[j] == bm.model.ub[j] == 30.0


def test_chp_above_subsidy_limit_gets_no_subsidy(make_scn):
    scn = make_scn(("chp", "boiler"), chp=50.0)
    scn = replace(scn, policy=replace(scn.policy, chp_capacity_subsidy_limit=40.0))
    bm = build_model(scn)
    for k in ("chp_grid", "chp_te", "chp_self"):
        assert np.all(bm.model.ub[bm.v[k]] == 0.0)


def test_storage_is_cyclic_per_block(building1):
    scn = Scenario(building1, config=ModelConfig(time_slice=TimeSlice.representative_weeks(2)))
    bm = build_model(scn)
    A = bm.model.matrix().tocsr()
    rows = [r for r in range(bm.model.num_cons) if bm.model.con_name(r).startswith("hs_dynamics")]
    lvl = bm.v["hs_lvl"]
    # the last hour of the first week feeds the first hour of that week
    last = A[rows[167]].toarray().ravel()
    assert last[lvl[0]] != 0 and last[lvl[168]] == 0


# ---------------------------------------------------------------------------
# solved models


@pytest.fixture(scope="module")
def chp_solution(make_scn):
    bm = build_model(make_scn(("chp", "boiler", "heat_storage", "hp", "battery"), chp=10.0))
    return bm, solve(bm.model, EXACT)


@pytest.fixture(scope="module")
def pv_solution(make_scn):
    bm = build_model(make_scn(("pv", "boiler", "heat_storage")))
    return bm, solve(bm.model, EXACT)


def test_solutions_are_feasible(chp_solution, pv_solution):
    for bm, sol in (chp_solution, pv_solution):
        assert sol.status == OPTIMAL
        rep = verify_feasibility(bm.model, sol)
        assert rep.passed, str(rep)
        assert rep.max_violation < 1e-6


def test_category_values_sum_to_objective(chp_solution):
    bm, sol = chp_solution
    values = bm.category_values(sol.x)
    assert set(values) <= set(CASH_FLOW_CATEGORIES)
    assert sum(values.values()) == pytest.approx(sol.objective_value, rel=1e-9)


def test_heat_balance_closed(chp_solution):
    bm, sol = chp_solution
    x, v, t = sol.x, bm.v, bm.scenario.tech
    supply = (x[v["chp_el"]] / t.chp_power_to_heat + x[v["q_boiler"]] + x[v["q_hp"]]
              + x[v["hs_dis"]] - x[v["hs_ch"]])
    np.testing.assert_allclose(supply, bm.heat_demand, atol=1e-6)


def _names(bm, x):
    return verify_feasibility(bm.model, x).names()


def test_perturbation_min_load(chp_solution):
    bm, sol = chp_solution
    x = sol.x.copy()
    t = 5
    x[bm.v["chp_on"][t]] = 1.0
    x[bm.v["chp_el"][t]] = 1.0  # below 0.4 * 10 kW
    assert f"chp_semicontinuity[{t}]" in _names(bm, x)


def test_perturbation_full_load_cap(chp_solution):
    bm, sol = chp_solution
    x = sol.x.copy()
    x[bm.v["chp_te"]] += 10.0
    assert "chp_fullload_cap" in _names(bm, x)


def test_perturbation_levy_threshold(make_scn):
    bm = build_model(make_scn(("chp", "boiler", "hp"), chp_mode="cascading", cascade_unit_count=2))
    sol = solve(bm.model, SolveOptions(relative_gap=1e-6))
    x = sol.x.copy()
    x[bm.v["cap_chp"]] = 20.0
    x[bm.v["bin_chp_levy"]] = 0.0
    assert "chp_levy_capacity" in _names(bm, x)
    x = sol.x.copy()
    x[bm.v["chp_hp"]] += 5000.0 / 48
    x[bm.v["bin_chp_levy"]] = 0.0
    x[bm.v["chp_levy"]] = 0.0
    assert "chp_levy_energy" in _names(bm, x)


def test_perturbation_scheme_uniqueness(pv_solution):
    bm, sol = pv_solution
    x = sol.x.copy()
    x[bm.v["bin_pv"]] = 0.0
    x[bm.v["bin_pv"][[0, 3]]] = 1.0
    assert "pv_scheme_uniqueness" in _names(bm, x)


def test_one_scheme_selected(pv_solution):
    bm, sol = pv_solution
    chosen = np.round(sol.x[bm.v["bin_pv"]])
    assert chosen.sum() == 1
    cap = sol.x[bm.v["cap_pv"]]
    k = int(np.argmax(chosen))
    assert cap <= bm.schemes[k].capacity_upper_limit + 1e-9
    assert k == 0 or cap >= bm.schemes[k - 1].capacity_upper_limit - 1e-6 or cap == 0


def test_aggregate_and_hourly_scheme_flows_agree(make_scn, pv_solution):
    _, agg = pv_solution
    bm = build_model(make_scn(("pv", "boiler", "heat_storage"), pv_scheme_flows="hourly"))
    hourly = solve(bm.model, EXACT)
    assert hourly.objective_value == pytest.approx(agg.objective_value, rel=1e-7)


def test_higher_chp_feed_in_never_lowers_npv(make_scn, chp_solution):
    _, base = chp_solution
    scn = make_scn(("chp", "boiler", "heat_storage", "hp", "battery"), chp=10.0)
    scn = replace(scn, policy=replace(scn.policy, chp_feed_in=0.25))
    assert solve(build_model(scn).model, EXACT).objective_value >= base.objective_value - 1e-6


def test_dearer_battery_never_raises_npv(make_scn, chp_solution):
    _, base = chp_solution
    scn = make_scn(("chp", "boiler", "heat_storage", "hp", "battery"), chp=10.0)
    scn = replace(scn, tech=scn.tech.with_cost("battery", variable_investment=2000.0))
    assert solve(build_model(scn).model, EXACT).objective_value <= base.objective_value + 1e-6


def test_fixed_capacity_is_respected(make_scn):
    bm = build_model(make_scn(("boiler", "heat_storage"), fixed_capacities={"heat_storage": 25.0}))
    sol = solve(bm.model, EXACT)
    assert sol.x[bm.v["cap_heat_storage"]] == pytest.approx(25.0)
    assert sol.x[bm.v["bin_fix_heat_storage"]] == pytest.approx(1.0)


def test_without_subsidies_scheme_income_is_zero(make_scn):
    scn = make_scn(("pv", "boiler"))
    scn = replace(scn, policy=PolicyRuleSet.tel2021().without_subsidies())
    bm = build_model(scn)
    sol = solve(bm.model, EXACT)
    values = bm.category_values(sol.x)
    assert values.get("scp", 0.0) == 0.0
    assert values.get("feed_in", 0.0) == 0.0
