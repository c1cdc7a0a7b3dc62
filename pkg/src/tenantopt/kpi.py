"""Post-solve indicators: self-consumption, grid interaction, CO2 accounting, abatement cost and cash flows.

Everything here works from a saved dispatch and the scenario parameters, never
from the MILP, so the cash-flow decomposition doubles as an independent check
of the model's objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .builder import CAPACITY_UNITS, Scenario
from .dispatch import DispatchSchedule, SystemDesign
from .domain import EconomicParams, EmissionParams, TechCost, TechnologyParams

G_PER_T = 1e6


# ---------------------------------------------------------------------------
# self-consumption and grid interaction


def _onsite_use(d: DispatchSchedule) -> np.ndarray:
    """Generation consumed in the building, unsubsidised CHP flows included."""
    f = d.flows
    return (f["pv_te"] + f["pv_hp"] + f["pv_bat"]
            + f["chp_te"] + f["chp_te_wo"] + f["chp_self"] + f["chp_self_wo"])


def compute_self_consumption(d: DispatchSchedule) -> tuple[float | None, float, float | None]:
    """(SCR, DSS, DA) as fractions; SCR and DA are None without generation."""
    generation = float(np.sum(d.weights * (d.pv_generation + d.flows["chp_el"])))
    used = float(np.sum(d.weights * _onsite_use(d)))
    demand = float(np.sum(d.weights * d.total_demand))
    dss = used / demand if demand > 0 else 0.0
    if generation <= 0:
        return None, dss, None
    da = generation / demand if demand > 0 else None
    return used / generation, dss, da


def _variability(profile: np.ndarray) -> float:
    peak = float(np.max(np.abs(profile), initial=0.0))
    if peak == 0 or len(profile) < 2:
        return 0.0
    return float(np.std(profile, ddof=1)) / peak


def compute_gii(feed_in: np.ndarray, demand: np.ndarray) -> tuple[float, float | None]:
    """Grid interaction index of the feed-in profile and its ratio to the demand's index."""
    feed_in = np.asarray(feed_in, dtype=float)
    demand = np.asarray(demand, dtype=float)
    gii = _variability(feed_in)
    ref = _variability(demand)
    return gii, (gii / ref if ref > 0 else None)


# ---------------------------------------------------------------------------
# emissions


def grid_emission_factors(emis: EmissionParams, horizon: int) -> np.ndarray:
    """Grid factor in g/kWh for each project year, declining geometrically."""
    a = np.arange(horizon) + emis.grid_factor_year_offset
    return emis.grid_emission_factor * (1.0 - emis.grid_emission_decline_rate) ** a


def lifetime_emissions(grid_kwh: float, gas_kwh: float, emis: EmissionParams, horizon: int) -> float:
    """Tonnes of CO2 over the horizon for constant annual grid and gas consumption."""
    grid = grid_kwh * float(np.sum(grid_emission_factors(emis, horizon)))
    gas = gas_kwh * emis.gas_emission_factor * horizon
    return (grid + gas) / G_PER_T


def annual_grid_and_gas(d: DispatchSchedule, tech: TechnologyParams) -> tuple[float, float]:
    """Grid electricity drawn by the building and gas burnt, in kWh per year."""
    grid = d.annual("grid_te") + d.annual("grid_hp")
    gas = d.annual("chp_el") / tech.chp_el_efficiency + d.annual("q_boiler") / tech.boiler_efficiency
    return grid, gas


def case_emissions(d: DispatchSchedule, emis: EmissionParams, tech: TechnologyParams, horizon: int) -> float:
    return lifetime_emissions(*annual_grid_and_gas(d, tech), emis, horizon)


def compute_co2(ref: DispatchSchedule, opt: DispatchSchedule, emis: EmissionParams, tech: TechnologyParams,
                horizon: int) -> tuple[float, float, float]:
    """(CO2 of the reference, CO2 of the optimised case, reduction), all in t over the horizon."""
    co2_ref = case_emissions(ref, emis, tech, horizon)
    co2_opt = case_emissions(opt, emis, tech, horizon)
    return co2_ref, co2_opt, co2_ref - co2_opt


def chp_emission_factor(emis: EmissionParams, tech: TechnologyParams) -> float:
    """Electric emission factor of the CHP unit in g/kWh_el by the alternative generation method."""
    if emis.alt_electric_efficiency <= 0 or emis.alt_thermal_efficiency <= 0:
        raise ValueError("alternative efficiencies must be > 0")
    if tech.chp_el_efficiency <= 0:
        raise ValueError("CHP electric efficiency must be > 0")
    el_ratio = tech.chp_el_efficiency / emis.alt_electric_efficiency
    pes = 1.0 - 1.0 / (tech.chp_th_efficiency / emis.alt_thermal_efficiency + el_ratio)
    return (1.0 - pes) * el_ratio * emis.gas_emission_factor / tech.chp_el_efficiency


def compute_co2_export(d: DispatchSchedule, emis: EmissionParams, tech: TechnologyParams,
                       horizon: int) -> tuple[float, float]:
    """(exported CO2, exported minus displaced grid CO2) in t over the horizon."""
    pv = d.annual("pv_grid")
    chp = d.annual("chp_grid") + d.annual("chp_grid_wo")
    export = horizon * (pv * emis.pv_emission_factor + chp * chp_emission_factor(emis, tech)) / G_PER_T
    displaced = (pv + chp) * float(np.sum(grid_emission_factors(emis, horizon))) / G_PER_T
    return export, export - displaced


def compute_abatement_cost(subsidy_cash_flow: float, delta_co2: float, delta_co2_export: float) -> float | None:
    """Subsidy per tonne of net abatement in EUR/t; None when nothing is abated."""
    denom = delta_co2 - delta_co2_export
    if denom <= 0:
        return None
    return subsidy_cash_flow / denom


# ---------------------------------------------------------------------------
# cash flows


def _reinvestment_schedule(cost: TechCost, econ: EconomicParams) -> tuple[list[int], float]:
    """Years in which a unit is (re)bought and the unused share of the last one at the horizon."""
    A = econ.horizon_years
    years = list(range(0, A, cost.lifetime))
    residual = (years[-1] + cost.lifetime - A) / cost.lifetime
    return years, residual


def investment_cash_flow(cost: TechCost, capacity: float, built: bool, econ: EconomicParams,
                         unit_count: int = 1) -> float:
    """Discounted (negative) investment: fixed cost once, variable cost per purchase, residual value credited."""
    if not built and capacity <= 0:
        return 0.0
    i, g = econ.discount_rate, 1.0 + cost.price_change_rate
    years, residual = _reinvestment_schedule(cost, econ)
    total = cost.fixed_investment * unit_count * float(built)
    for a in years:
        total += cost.variable_investment * capacity * g**a / (1.0 + i) ** a
    A = econ.horizon_years
    total -= residual * cost.variable_investment * capacity * g**A / (1.0 + i) ** A
    return -total


def cash_flow_breakdown(d: DispatchSchedule, design: SystemDesign, scn: Scenario) -> dict[str, float]:
    """Discounted cash flows per category in EUR; the values sum to the NPV."""
    econ, policy, tech, emis = scn.econ, scn.policy, scn.tech, scn.emis
    out = {f"investment_{k}": investment_cash_flow(
        tech.cost(k), design.capacities[k], design.built[k], econ,
        design.chp_unit_count if k == "chp" else 1) for k in CAPACITY_UNITS}
    for key in ("om", "fuel", "tenant_sales", "fees", "feed_in", "scp", "levy", "grid_trade", "heat_revenue"):
        out[key] = 0.0

    sold = sum(d.annual(k) for k in ("pv_te", "chp_te", "chp_te_wo", "bat_dis"))
    grid_te = d.annual("grid_te") if d.tenant_electricity else 0.0
    grid_ll = d.annual("grid_ll")
    pv_grid, pv_te = d.annual("pv_grid"), d.annual("pv_te")
    pv_self = d.annual("pv_hp") + d.annual("pv_bat")
    chp_gas = d.annual("chp_el") / tech.chp_el_efficiency
    boiler_gas = d.annual("q_boiler") / tech.boiler_efficiency
    heat = d.annual("heat_demand")
    om_annual = sum(tech.cost(k).om_rate * design.capacities[k] for k in CAPACITY_UNITS)

    for a in range(econ.horizon_years):
        df = (1.0 + econ.discount_rate) ** -a
        g = (1.0 + econ.price_change_rate) ** a
        c_te = econ.tenant_price * g
        c_ll = econ.landlord_grid_price * g
        year = econ.start_year + a
        gas = econ.gas_base_price * g + econ.co2_price_schedule[year] * emis.gas_emission_factor / G_PER_T
        fee = econ.rel_levy + c_te * econ.vat_rate / (1.0 + econ.vat_rate) + econ.metering_invoicing_cost

        out["om"] -= df * om_annual
        out["tenant_sales"] += df * c_te * sold
        out["fees"] -= df * fee * sold
        out["grid_trade"] += df * (c_te * grid_te - c_ll * grid_ll)
        out["feed_in"] += df * (design.pv_feed_in * pv_grid + policy.chp_feed_in * d.annual("chp_grid"))
        out["scp"] += df * (design.pv_scp * pv_te
                            + policy.chp_scp * (d.annual("chp_te") + d.annual("chp_self")))
        out["levy"] -= df * (design.pv_levy * pv_self
                             + policy.chp_levy_share * econ.rel_levy * d.annual("chp_levy"))
        out["fuel"] -= df * gas * (chp_gas + boiler_gas)
        out["heat_revenue"] += df * gas / tech.boiler_efficiency * heat
    return out


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class Reference:
    """Baseline quantities a scenario is compared against."""

    npv: float
    co2: float


@dataclass
class KpiReport:
    name: str
    npv: float
    delta_npv: float | None
    scr: float | None
    dss: float
    da: float | None
    gii: float
    gii_norm: float | None
    co2_ref: float | None
    co2_opt: float
    delta_co2: float | None
    co2_export: float
    delta_co2_export: float
    subsidy_cash_flow: float
    abatement_cost: float | None
    capacities: dict[str, float]
    chp_peak_output: float
    chp_full_load_hours: float | None
    d_el_te: float
    d_el_hp: float
    d_el_ev: float
    d_el_tot: float
    q_te: float
    pv_scheme: int | None = None
    status: str = ""
    gap: float = 0.0
    cash_flows: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict[str, object]:
        """Flat record keyed by column name with the unit as suffix; absent values are None."""
        rec: dict[str, object] = {
            "scenario": self.name,
            "status": self.status,
            "gap_frac": self.gap,
            "npv_EUR": self.npv,
            "delta_npv_EUR": self.delta_npv,
        }
        for tech, unit in CAPACITY_UNITS.items():
            rec[f"cap_{tech}_{unit}"] = self.capacities.get(tech, 0.0)
        rec.update({
            "pv_scheme_index": self.pv_scheme,
            "scr_frac": self.scr,
            "dss_frac": self.dss,
            "da_frac": self.da,
            "gii_frac": self.gii,
            "gii_norm_frac": self.gii_norm,
            "co2_ref_t": self.co2_ref,
            "co2_opt_t": self.co2_opt,
            "delta_co2_t": self.delta_co2,
            "co2_export_t": self.co2_export,
            "delta_co2_export_t": self.delta_co2_export,
            "subsidy_cash_flow_EUR": self.subsidy_cash_flow,
            "abatement_cost_EUR_per_t": self.abatement_cost,
            "chp_peak_output_kWel": self.chp_peak_output,
            "chp_full_load_hours_h": self.chp_full_load_hours,
            "d_el_te_kWh": self.d_el_te,
            "d_el_hp_kWh": self.d_el_hp,
            "d_el_ev_kWh": self.d_el_ev,
            "d_el_tot_kWh": self.d_el_tot,
            "q_te_kWh": self.q_te,
        })
        return rec


RESULT_COLUMNS = (
    "scenario", "status", "gap_frac", "npv_EUR", "delta_npv_EUR",
    *(f"cap_{tech}_{unit}" for tech, unit in CAPACITY_UNITS.items()),
    "pv_scheme_index", "scr_frac", "dss_frac", "da_frac", "gii_frac", "gii_norm_frac",
    "co2_ref_t", "co2_opt_t", "delta_co2_t", "co2_export_t", "delta_co2_export_t",
    "subsidy_cash_flow_EUR", "abatement_cost_EUR_per_t", "chp_peak_output_kWel", "chp_full_load_hours_h",
    "d_el_te_kWh", "d_el_hp_kWh", "d_el_ev_kWh", "d_el_tot_kWh", "q_te_kWh",
)


def build_report(
    name: str,
    design: SystemDesign,
    schedule: DispatchSchedule,
    scn: Scenario,
    npv: float,
    reference: Reference | None = None,
    status: str = "",
    gap: float = 0.0,
) -> KpiReport:
    """All indicators of one solved scenario; deltas need the reference case."""
    A = scn.econ.horizon_years
    scr, dss, da = compute_self_consumption(schedule)
    gii, gii_norm = compute_gii(schedule.feed_in, schedule.total_demand)
    co2_opt = case_emissions(schedule, scn.emis, scn.tech, A)
    co2_export, delta_export = compute_co2_export(schedule, scn.emis, scn.tech, A)
    flows = cash_flow_breakdown(schedule, design, scn)
    cf_subs = flows["feed_in"] + flows["scp"]
    delta_co2 = reference.co2 - co2_opt if reference else None
    cac = compute_abatement_cost(cf_subs, delta_co2, delta_export) if delta_co2 is not None else None
    cap_chp = design.capacities.get("chp", 0.0)
    chp_el = schedule.annual("chp_el")
    return KpiReport(
        name=name,
        npv=npv,
        delta_npv=npv - reference.npv if reference else None,
        scr=scr,
        dss=dss,
        da=da,
        gii=gii,
        gii_norm=gii_norm,
        co2_ref=reference.co2 if reference else None,
        co2_opt=co2_opt,
        delta_co2=delta_co2,
        co2_export=co2_export,
        delta_co2_export=delta_export,
        subsidy_cash_flow=cf_subs,
        abatement_cost=cac,
        capacities=dict(design.capacities),
        chp_peak_output=float(np.max(schedule.flows["chp_el"], initial=0.0)),
        chp_full_load_hours=A * chp_el / cap_chp if cap_chp > 0 else None,
        d_el_te=schedule.annual("el_demand"),
        d_el_hp=float(np.sum(schedule.weights * schedule.hp_load)),
        d_el_ev=float(np.sum(schedule.weights * schedule.ev_load)),
        d_el_tot=float(np.sum(schedule.weights * schedule.total_demand)),
        q_te=schedule.annual("heat_demand"),
        pv_scheme=design.pv_scheme,
        status=status,
        gap=gap,
        cash_flows=flows,
    )


def finite_or_none(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)
