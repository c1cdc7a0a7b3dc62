"""Brute-force reference optimum for small boiler + CHP instances.

The instance has no storage, a fixed boiler and a fixed CHP capacity, unit
hour weights and integer data: electricity demand and CHP capacity in whole
kW, heat demand such that the CHP heat limit ``sigma * Q`` is a whole kW, and a
whole-kWh subsidised energy budget. Dynamic programming runs over hours with
the used subsidised energy as state and enumerates every integer CHP output,
tenant share and subsidised share per hour. Prices come from a year loop
written here, not from the price book used by the model builder.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .builder import ModelConfig, Scenario, TimeSlice
from .domain import HOURS_PER_YEAR, Building, HourlyProfile, PolicyRuleSet


@dataclass(frozen=True)
class UnitValues:
    """Discounted value over the horizon of one kWh per year in each use."""

    c_te: float
    c_ll: float
    fee: float
    gas: float
    annuity: float  # sum of discount factors


def unit_values(scn: Scenario) -> UnitValues:
    econ, emis = scn.econ, scn.emis
    c_te = c_ll = fee = gas = ann = 0.0
    for a in range(econ.horizon_years):
        df = 1.0 / (1.0 + econ.discount_rate) ** a
        g = (1.0 + econ.price_change_rate) ** a
        te = econ.tenant_price * g
        c_te += df * te
        c_ll += df * econ.landlord_grid_price * g
        fee += df * (econ.rel_levy + te * econ.vat_rate / (1.0 + econ.vat_rate) + econ.metering_invoicing_cost)
        co2 = econ.co2_price_schedule[econ.start_year + a]
        gas += df * (econ.gas_base_price * g + co2 * emis.gas_emission_factor * 1e-6)
        ann += df
    return UnitValues(c_te, c_ll, fee, gas, ann)


def _capex(scn: Scenario, tech: str, capacity: float) -> float:
    """Discounted investment (explicit replacement years, linear residual value) plus O&M."""
    cost = scn.tech.cost(tech)
    econ = scn.econ
    if capacity <= 0:
        return 0.0
    A, i, g = econ.horizon_years, econ.discount_rate, 1.0 + cost.price_change_rate
    total = cost.fixed_investment
    last = 0
    for a in range(0, A, cost.lifetime):
        total += cost.variable_investment * capacity * g**a / (1 + i) ** a
        last = a
    unused = (last + cost.lifetime - A) / cost.lifetime
    total -= unused * cost.variable_investment * capacity * g**A / (1 + i) ** A
    return total + cost.om_rate * capacity * unit_values(scn).annuity


@dataclass
class OracleResult:
    npv: float
    chp_el: np.ndarray
    chp_te: np.ndarray  # subsidised, to tenants
    chp_grid: np.ndarray  # subsidised, exported
    chp_te_wo: np.ndarray
    chp_grid_wo: np.ndarray
    states: int


def _check_integral(name: str, arr: np.ndarray) -> None:
    if not np.allclose(arr, np.round(arr), atol=1e-9):
        raise ValueError(f"{name} must be whole numbers for the brute-force oracle")


def brute_force_dispatch(scn: Scenario, hours: int, chp_capacity: int, boiler_capacity: float) -> OracleResult:
    """Exact optimum over the first ``hours`` hours of the building's profiles."""
    b, tech, policy = scn.building, scn.tech, scn.policy
    D = np.asarray(b.electricity_demand.values[:hours], dtype=float)
    Q = np.asarray(b.heat_demand.values[:hours], dtype=float)
    sigma = tech.chp_power_to_heat
    heat_cap = sigma * Q
    _check_integral("electricity demand", D)
    _check_integral("CHP heat limit", heat_cap)
    min_load = tech.chp_min_load_factor * chp_capacity
    budget_f = policy.chp_subsidized_full_load_hours / scn.econ.horizon_years * chp_capacity
    _check_integral("subsidised budget", np.array([budget_f]))
    if chp_capacity > policy.chp_capacity_subsidy_limit:
        budget_f = 0.0
    budget = int(round(budget_f))
    if np.any(Q > boiler_capacity + 1e-9):
        raise ValueError("boiler capacity below peak heat demand")

    uv = unit_values(scn)
    fuel_chp = uv.gas / tech.chp_el_efficiency
    boiler_heat = uv.gas / tech.boiler_efficiency
    # value of each kWh by destination, relative to buying it from the grid for tenants
    v_te = uv.c_ll - uv.fee
    v_te_sub = v_te + policy.chp_scp * uv.annuity
    v_grid_sub = policy.chp_feed_in * uv.annuity
    v_grid = 0.0

    const = -_capex(scn, "boiler", boiler_capacity) - _capex(scn, "chp", chp_capacity)
    # tenants' residual grid purchase is resold at the tenant price
    const += float(np.sum(D)) * (uv.c_te - uv.c_ll)

    NEG = -np.inf
    value = np.full(budget + 1, NEG)
    value[0] = 0.0
    choice = []
    for t in range(hours):
        levels = [0] + [p for p in range(int(np.ceil(min_load - 1e-9)), chp_capacity + 1) if p > 0]
        levels = [p for p in levels if p <= heat_cap[t] + 1e-9]
        new = np.full(budget + 1, NEG)
        arg = [None] * (budget + 1)
        for p in levels:
            base = -p * fuel_chp + p / sigma * boiler_heat
            for te in range(0, int(min(p, D[t])) + 1):
                for s_te in range(0, te + 1):
                    for s_grid in range(0, p - te + 1):
                        s = s_te + s_grid
                        if s > budget:
                            break
                        hour = (base + s_te * v_te_sub + (te - s_te) * v_te
                                + s_grid * v_grid_sub + (p - te - s_grid) * v_grid)
                        for u in range(budget - s + 1):
                            if value[u] == NEG:
                                continue
                            cand = value[u] + hour
                            if cand > new[u + s]:
                                new[u + s] = cand
                                arg[u + s] = (u, p, te, s_te, s_grid)
        value = new
        choice.append(arg)

    end = int(np.argmax(value))
    best = float(value[end])
    chp_el, chp_te, chp_grid, chp_te_wo, chp_grid_wo = (np.zeros(hours) for _ in range(5))
    u = end
    for t in range(hours - 1, -1, -1):
        prev, p, te, s_te, s_grid = choice[t][u]
        chp_el[t], chp_te[t], chp_grid[t] = p, s_te, s_grid
        chp_te_wo[t], chp_grid_wo[t] = te - s_te, p - te - s_grid
        u = prev
    # heat revenue equals the boiler fuel for the whole demand, so only the CHP terms remain
    return OracleResult(const + best, chp_el, chp_te, chp_grid, chp_te_wo, chp_grid_wo, budget + 1)


@dataclass(frozen=True)
class ToyInstance:
    scenario: Scenario
    hours: int
    chp_capacity: int
    boiler_capacity: float


def make_toy_instance(seed: int, hours: int = 24) -> ToyInstance:
    """Random whole-number boiler + CHP instance that both the MILP and the oracle can solve."""
    rng = np.random.default_rng(seed)
    el = np.zeros(HOURS_PER_YEAR)
    heat = np.zeros(HOURS_PER_YEAR)
    el[:hours] = rng.integers(1, 9, size=hours)
    heat[:hours] = 5 * rng.integers(0, 7, size=hours)
    cap = int(rng.choice([5, 10]))
    boiler = float(max(heat.max(), 5.0))
    # lifetime full-load hours chosen so the yearly subsidised budget is k * cap kWh
    k = int(rng.integers(2, 7))
    base = PolicyRuleSet.tel2021()
    policy = replace(base, chp_subsidized_full_load_hours=float(k * 20))
    building = Building(f"toy-{seed}", HourlyProfile(el, "kWh"), HourlyProfile(heat, "kWh"), roof_area=0.0)
    config = ModelConfig(
        technologies=frozenset({"boiler", "chp"}),
        chp_capacity=float(cap),
        time_slice=TimeSlice.first_hours(hours),
        fixed_capacities={"boiler": boiler},
        name=f"toy-{seed}",
    )
    return ToyInstance(Scenario(building, policy=policy, config=config), hours, cap, boiler)
