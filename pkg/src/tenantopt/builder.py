"""Scenario -> MILP translation: capacities, hourly flows, policy constraints and the NPV objective."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .domain import (
    HOURS_PER_YEAR,
    Building,
    EconomicParams,
    EmissionParams,
    PolicyRuleSet,
    TechCost,
    TechnologyParams,
)
from .milp import MilpModel
from .remuneration import PvRemunerationScheme, YearlyPriceBook, build_price_book, build_pv_scheme_table

# ---------------------------------------------------------------------------
# configuration

CHP_MODES = ("sweep", "cascading")
EV_MODES = ("none", "fixed", "optimized")
PV_FLOW_MODES = ("aggregate", "hourly")

# PV cash-flow classes subject to the scheme big-M (tenant, feed-in, self-consumption)
PV_CLASSES = ("te", "grid", "self")

CAPACITY_UNITS = {
    "pv": "kWp",
    "inverter": "kW",
    "chp": "kWel",
    "hp": "kWth",
    "boiler": "kWth",
    "heat_storage": "kWh",
    "battery": "kWh",
}


@dataclass(frozen=True)
class TimeSlice:
    """Modelled hours of the representative year and the weight of each.

    ``blocks`` are the lengths of consecutive runs in ``hours``; storage levels
    are cyclic within each block.
    """

    hours: tuple[int, ...]
    weight: float = 1.0
    blocks: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.hours:
            raise ValueError("time slice needs at least one hour")
        if not self.blocks:
            object.__setattr__(self, "blocks", (len(self.hours),))
        if sum(self.blocks) != len(self.hours):
            raise ValueError("block lengths must add up to the number of hours")
        if not self.weight > 0:
            raise ValueError("weight must be positive")

    @classmethod
    def full_year(cls) -> "TimeSlice":
        return cls(tuple(range(HOURS_PER_YEAR)), 1.0)

    @classmethod
    def first_hours(cls, n: int, weight: float = 1.0) -> "TimeSlice":
        return cls(tuple(range(n)), weight)

    @classmethod
    def representative_weeks(cls, count: int) -> "TimeSlice":
        """``count`` evenly spread weeks, each standing for 8760/(168*count) of itself."""
        if not 1 <= count <= 52:
            raise ValueError("count must be in 1..52")
        starts = [int(round((k + 0.5) * 52 / count - 0.5)) * 168 for k in range(count)]
        hours = tuple(h for s in starts for h in range(s, s + 168))
        return cls(hours, HOURS_PER_YEAR / len(hours), tuple(168 for _ in starts))

    @property
    def length(self) -> int:
        return len(self.hours)

    def index(self) -> np.ndarray:
        return np.asarray(self.hours, dtype=int)

    def block_ranges(self) -> list[tuple[int, int]]:
        out, s = [], 0
        for b in self.blocks:
            out.append((s, s + b))
            s += b
        return out


@dataclass(frozen=True)
class ModelConfig:
    technologies: frozenset[str] = frozenset({"boiler", "heat_storage"})
    # None: tenant electricity scheme active iff PV or CHP is enabled
    tenant_electricity: bool | None = None
    chp_mode: str = "sweep"
    chp_capacity: float = 0.0
    cascade_unit_count: int = 1
    cascade_min_load: float = 4.0
    ev_mode: str = "none"
    time_slice: TimeSlice = field(default_factory=TimeSlice.full_year)
    pv_scheme_flows: str = "aggregate"
    scheme_count: int = 19
    scheme_max_capacity: float = 100.0
    fixed_capacities: Mapping[str, float] = field(default_factory=dict)
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "technologies", frozenset(self.technologies))
        if self.chp_mode not in CHP_MODES:
            raise ValueError(f"chp_mode must be one of {CHP_MODES}")
        if self.ev_mode not in EV_MODES:
            raise ValueError(f"ev_mode must be one of {EV_MODES}")
        if self.pv_scheme_flows not in PV_FLOW_MODES:
            raise ValueError(f"pv_scheme_flows must be one of {PV_FLOW_MODES}")
        if self.chp_capacity < 0:
            raise ValueError("CHP capacity must be >= 0")
        unknown = self.technologies - set(CAPACITY_UNITS)
        if unknown:
            raise ValueError(f"unknown technologies {sorted(unknown)}")

    @property
    def is_tenant_electricity(self) -> bool:
        if self.tenant_electricity is not None:
            return self.tenant_electricity
        return bool({"pv", "chp"} & self.technologies)

    def enabled(self, tech: str) -> bool:
        if tech == "inverter":
            return "pv" in self.technologies
        return tech in self.technologies


@dataclass(frozen=True)
class Scenario:
    building: Building
    tech: TechnologyParams = field(default_factory=TechnologyParams)
    econ: EconomicParams = field(default_factory=EconomicParams)
    policy: PolicyRuleSet = field(default_factory=PolicyRuleSet.tel2021)
    emis: EmissionParams = field(default_factory=EmissionParams)
    config: ModelConfig = field(default_factory=ModelConfig)


# ---------------------------------------------------------------------------
# investment



def investment_factor(cost: TechCost, econ: EconomicParams) -> float:
    """Discounted cost of one capacity unit over the horizon, reinvestment and residual value included."""
    A, i, clt = econ.horizon_years, econ.discount_rate, cost.lifetime
    if clt < 1:
        raise ValueError("lifetime must be >= 1 year")
    growth = 1.0 + cost.price_change_rate
    factor = 1.0
    k = 1
    while k * clt < A:
        a = k * clt
        factor += growth**a / (1.0 + i) ** a
        k += 1
    remaining = clt * math.ceil(A / clt) - A
    factor -= (remaining / clt) * growth**A / (1.0 + i) ** A
    return factor


def discounted_investment(cost: TechCost, capacity: float, econ: EconomicParams, built: bool | None = None) -> float:
    """Fixed plus variable investment of ``capacity`` including reinvestments and residual value."""
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    built = capacity > 0 if built is None else built
    return cost.fixed_investment * float(built) + cost.variable_investment * investment_factor(cost, econ) * capacity


# ---------------------------------------------------------------------------
# built model


@dataclass
class ObjectiveTerm:
    category: str
    idx: np.ndarray
    coef: np.ndarray


@dataclass
class BuiltModel:
    model: MilpModel
    scenario: Scenario
    book: YearlyPriceBook
    schemes: list[PvRemunerationScheme]
    weights: np.ndarray
    el_demand: np.ndarray
    ev_demand: np.ndarray
    heat_demand: np.ndarray
    cop: np.ndarray
    pv_yield: np.ndarray
    v: dict[str, np.ndarray] = field(default_factory=dict)
    terms: list[ObjectiveTerm] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def config(self) -> ModelConfig:
        return self.scenario.config

    @property
    def hours(self) -> int:
        return len(self.weights)

    def objective(self, category: str, idx, coef) -> None:
        idx = np.asarray(idx)
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape).copy()
        self.model.add_objective(idx, coef)
        self.terms.append(ObjectiveTerm(category, idx, coef))

    def constant(self, category: str, value: float) -> None:
        self.model.objective_constant += value
        self.constants[category] = self.constants.get(category, 0.0) + value

    def category_values(self, x: np.ndarray) -> dict[str, float]:
        """Objective split into cash-flow categories at the point ``x``."""
        out: dict[str, float] = dict(self.constants)
        for term in self.terms:
            out[term.category] = out.get(term.category, 0.0) + float(np.sum(term.coef * x[term.idx]))
        return out


# ---------------------------------------------------------------------------
# construction


def _slice_profile(profile, idx, name, required=True) -> np.ndarray:
    if profile is None:
        if required:
            raise ValueError(f"building has no {name} profile")
        return np.zeros(len(idx))
    values = profile.values
    if len(values) != HOURS_PER_YEAR:
        raise ValueError(f"{name} profile has {len(values)} values, expected {HOURS_PER_YEAR}")
    return np.asarray(values, dtype=float)[idx]


def capacity_upper_bounds(scn: Scenario) -> dict[str, float]:
    """Upper capacity bounds of every technology; zero when disabled."""
    b, t, cfg = scn.building, scn.tech, scn.config
    peak_heat = float(np.max(b.heat_demand.values)) if len(b.heat_demand) else 0.0
    heat_ub = max(1.25 * peak_heat, 1.0)
    pv_ub = min(b.roof_area * t.pv_area_density, cfg.scheme_max_capacity)
    peak_yield = float(np.max(b.pv_yield.values)) if b.pv_yield is not None and len(b.pv_yield) else 1.0
    ub = {
        "pv": pv_ub,
        "inverter": pv_ub * max(peak_yield, 1.0),
        "chp": t.chp_max_capacity,
        "hp": t.hp_max_capacity if t.hp_max_capacity is not None else heat_ub,
        "boiler": t.boiler_max_capacity if t.boiler_max_capacity is not None else heat_ub,
        "heat_storage": t.heat_storage_max_capacity,
        "battery": t.battery_max_capacity,
    }
    return {k: (v if cfg.enabled(k) else 0.0) for k, v in ub.items()}


def build_model(scn: Scenario) -> BuiltModel:
    """Translate a scenario into a maximisation MILP whose objective is the NPV in EUR."""
    cfg = scn.config
    idx = cfg.time_slice.index()
    if idx.min() < 0 or idx.max() >= HOURS_PER_YEAR:
        raise ValueError("time slice hours must lie in 0..8759")
    tech_on = cfg.technologies
    ev_demand = np.zeros(len(idx))
    if cfg.ev_mode != "none":
        if not scn.building.ev_profiles:
            raise ValueError("EV mode requires EV profiles")
        ev_demand = sum(_slice_profile(ev.demand, idx, "EV") for ev in scn.building.ev_profiles)
    book = build_price_book(scn.econ, scn.emis)
    schemes = build_pv_scheme_table(
        scn.policy, cfg.scheme_count, cfg.scheme_max_capacity, rel_levy=scn.econ.rel_levy
    )
    if not schemes:
        raise ValueError("PV scheme table is empty")
    bm = BuiltModel(
        model=MilpModel(cfg.name),
        scenario=scn,
        book=book,
        schemes=schemes,
        weights=np.full(len(idx), cfg.time_slice.weight),
        el_demand=_slice_profile(scn.building.electricity_demand, idx, "electricity demand"),
        ev_demand=ev_demand,
        heat_demand=_slice_profile(scn.building.heat_demand, idx, "heat demand"),
        cop=_slice_profile(scn.building.cop, idx, "COP", required="hp" in tech_on),
        pv_yield=_slice_profile(scn.building.pv_yield, idx, "PV yield", required="pv" in tech_on),
    )
    _add_capacities(bm)
    _add_flows(bm)
    add_pv_scheme_constraints(bm)
    add_chp_constraints(bm)
    add_chp_levy_threshold(bm)
    add_heat_pump_and_balances(bm)
    add_ev_charging(bm)
    build_objective(bm)
    return bm


def _add_capacities(bm: BuiltModel) -> None:
    scn, m, cfg = bm.scenario, bm.model, bm.config
    ub = capacity_upper_bounds(scn)
    for tech, hi in ub.items():
        lo = 0.0
        if tech in cfg.fixed_capacities and cfg.enabled(tech):
            lo = hi = float(cfg.fixed_capacities[tech])
        if tech == "chp" and cfg.chp_mode == "sweep":
            lo = hi = cfg.chp_capacity if cfg.enabled("chp") else 0.0
        bm.v[f"cap_{tech}"] = np.asarray(m.add_var(f"cap_{tech}", lo, hi, tag="capacity"))
        bm.v[f"bin_fix_{tech}"] = np.asarray(m.add_var(f"bin_fix_{tech}", 0.0, 1.0 if hi > 0 else 0.0,
                                                       binary=True, tag="build binary"))
        # cap <= ub * bin_fix
        m.add_constraints(f"{tech}_build", [(1.0, bm.v[f"cap_{tech}"]), (-max(hi, 0.0), bm.v[f"bin_fix_{tech}"])],
                          "<=", 0.0)
        if lo > 0:
            m.fix(bm.v[f"bin_fix_{tech}"], 1.0)


def _add_flows(bm: BuiltModel) -> None:
    m, cfg, T = bm.model, bm.config, bm.hours
    ub = capacity_upper_bounds(bm.scenario)
    pv_on, chp_on = ub["pv"] > 0, ub["chp"] > 0
    hp_on, bat_on, hs_on = ub["hp"] > 0, ub["battery"] > 0, ub["heat_storage"] > 0

    def flows(name, enabled=True, tag="flow"):
        bm.v[name] = m.add_vars(name, T, 0.0, math.inf if enabled else 0.0, tag=tag)

    for name in ("pv_te", "pv_grid"):
        flows(name, pv_on)
    flows("pv_hp", pv_on and hp_on)
    flows("pv_bat", pv_on and bat_on)
    flows("chp_el", chp_on)
    for name in ("chp_grid", "chp_te", "chp_grid_wo", "chp_te_wo"):
        flows(name, chp_on)
    flows("chp_self", chp_on and (hp_on or bat_on))
    flows("chp_self_wo", chp_on and (hp_on or bat_on))
    flows("chp_hp", chp_on and hp_on)
    flows("chp_bat", chp_on and bat_on)
    flows("chp_levy", chp_on and (hp_on or bat_on))
    bm.v["chp_on"] = m.add_vars("chp_on", T, 0.0, 1.0 if chp_on else 0.0, binary=True, tag="commitment binary")
    flows("grid_te")
    flows("grid_hp", hp_on)
    flows("grid_ll")
    flows("q_hp", hp_on)
    flows("q_boiler", ub["boiler"] > 0)
    flows("hs_ch", hs_on)
    flows("hs_dis", hs_on)
    flows("hs_lvl", hs_on, tag="level")
    flows("bat_dis", bat_on)
    flows("bat_lvl", bat_on, tag="level")
    if cfg.ev_mode == "optimized":
        evs = bm.scenario.building.ev_profiles
        avail = []
        for k, ev in enumerate(evs):
            if ev.available is None:
                raise ValueError(f"optimized EV charging needs availability data (vehicle {k})")
            avail.append(_slice_profile(ev.available, cfg.time_slice.index(), "EV availability"))
        power = bm.scenario.tech.ev_charger_power
        bm.v["ev_charge"] = m.add_vars("ev_charge", (len(evs), T), 0.0, power * np.clip(np.array(avail), 0, 1))


def add_pv_scheme_constraints(bm: BuiltModel) -> None:
    """Scheme choice, capacity-scheme coupling, scheme big-M and the PV generation balance."""
    m, v, T, w = bm.model, bm.v, bm.hours, bm.weights
    R = len(bm.schemes)
    pv_ub = capacity_upper_bounds(bm.scenario)["pv"]
    limits = np.array([s.capacity_upper_limit for s in bm.schemes])
    v["bin_pv"] = m.add_vars("bin_pv", R, binary=True, tag="scheme binary")
    m.add_constraint("pv_scheme_uniqueness", v["bin_pv"], 1.0, "==", 1.0)
    m.add_constraint("pv_capacity_scheme_limit", np.r_[v["cap_pv"], v["bin_pv"]], np.r_[1.0, -limits], "<=", 0.0)
    # capacity cannot exceed the scheme limit, so the limit is a tight per-scheme big-M
    cap_bound = np.minimum(limits, pv_ub)
    m.add_constraints(
        "pv_generation",
        [(1.0, v["pv_te"]), (1.0, v["pv_grid"]), (1.0, v["pv_hp"]), (1.0, v["pv_bat"]), (-bm.pv_yield, v["cap_pv"])],
        "==",
        0.0,
    )
    m.add_constraint("inverter_sizing", [v["cap_pv"], v["cap_inverter"]],
                     [float(np.max(bm.pv_yield, initial=0.0)), -1.0], "<=", 0.0)
    hourly = {
        "te": [v["pv_te"]],
        "grid": [v["pv_grid"]],
        "self": [v["pv_hp"], v["pv_bat"]],
    }
    # Valid inequalities: capacity copied into the chosen scheme bounds each scheme's
    # energy by its own capacity, which keeps the LP relaxation from pricing all
    # output at the best tariff through a fractional scheme binary.
    v["cap_pv_scheme"] = m.add_vars("cap_pv_scheme", R, tag="scheme capacity")
    m.add_row("pv_scheme_capacity_split", [(1.0, v["cap_pv_scheme"]), (-1.0, v["cap_pv"])], "==", 0.0)
    m.add_constraints("pv_scheme_capacity_bigm", [(1.0, v["cap_pv_scheme"]), (-cap_bound, v["bin_pv"])],
                      "<=", 0.0)
    if bm.config.pv_scheme_flows == "aggregate":
        annual_yield = float(np.sum(w * bm.pv_yield))
        for cf in PV_CLASSES:
            e = m.add_vars(f"pv_scheme_energy_{cf}", R, tag="scheme flow")
            v[f"pv_scheme_{cf}"] = e
            terms = [(1.0, e)] + [(-w, p) for p in hourly[cf]]
            m.add_row(f"pv_scheme_split_{cf}", terms, "==", 0.0)
            big_m = cap_bound * annual_yield
            m.add_constraints(f"pv_scheme_bigm_{cf}", [(1.0, e), (-big_m, v["bin_pv"])], "<=", 0.0)
        m.add_constraints(
            "pv_scheme_energy_capacity",
            [(1.0, v[f"pv_scheme_{cf}"]) for cf in PV_CLASSES] + [(-annual_yield, v["cap_pv_scheme"])],
            "<=",
            0.0,
        )
    else:
        for cf in PV_CLASSES:
            p = m.add_vars(f"pv_scheme_flow_{cf}", (R, T), tag="scheme flow")
            v[f"pv_scheme_{cf}"] = p
            terms = [(1.0, p.T)] + [(-1.0, q) for q in hourly[cf]]
            m.add_constraints(f"pv_scheme_split_{cf}", terms, "==", 0.0)
            big_m = cap_bound[:, None] * bm.pv_yield[None, :]
            m.add_constraints(
                f"pv_scheme_bigm_{cf}",
                [(1.0, p.ravel()), (-big_m.ravel(), np.repeat(v["bin_pv"], T))],
                "<=",
                0.0,
            )
        m.add_constraints(
            "pv_scheme_flow_capacity",
            [(1.0, v[f"pv_scheme_{cf}"].ravel()) for cf in PV_CLASSES]
            + [(-np.tile(bm.pv_yield, R), np.repeat(v["cap_pv_scheme"], T))],
            "<=",
            0.0,
        )


def add_chp_constraints(bm: BuiltModel) -> None:
    """Six-way output split, semi-continuous operation, subsidised full-load budget and heat co-product."""
    m, v, w, cfg = bm.model, bm.v, bm.weights, bm.config
    tech, policy, econ = bm.scenario.tech, bm.scenario.policy, bm.scenario.econ
    m.add_constraints(
        "chp_output_split",
        [(1.0, v["chp_el"])] + [(-1.0, v[k]) for k in
                                ("chp_grid", "chp_te", "chp_self", "chp_grid_wo", "chp_te_wo", "chp_self_wo")],
        "==",
        0.0,
    )
    m.add_constraints(
        "chp_self_destination",
        [(1.0, v["chp_self"]), (1.0, v["chp_self_wo"]), (-1.0, v["chp_hp"]), (-1.0, v["chp_bat"])],
        "==",
        0.0,
    )
    m.add_constraints("chp_levy_bound", [(1.0, v["chp_levy"]), (-1.0, v["chp_hp"]), (-1.0, v["chp_bat"])],
                      "<=", 0.0)
    budget = policy.chp_subsidized_full_load_hours / econ.horizon_years
    subsidised = ("chp_grid", "chp_te", "chp_self")
    if cfg.chp_mode == "sweep":
        cap = cfg.chp_capacity if cfg.enabled("chp") else 0.0
        m.add_constraints("chp_semicontinuity", [(tech.chp_min_load_factor * cap, v["chp_on"]), (-1.0, v["chp_el"])],
                          "<=", 0.0)
        m.add_constraints("chp_capacity_on", [(1.0, v["chp_el"]), (-cap, v["chp_on"])], "<=", 0.0)
        m.add_row("chp_fullload_cap", [(w, v[k]) for k in subsidised], "<=", budget * cap)
        if cap > policy.chp_capacity_subsidy_limit:
            for k in subsidised:
                m.set_bounds(v[k], ub=0.0)
    else:
        cap_max = capacity_upper_bounds(bm.scenario)["chp"]
        m.add_constraints("chp_capacity", [(1.0, v["chp_el"]), (-1.0, v["cap_chp"])], "<=", 0.0)
        m.add_constraints("chp_capacity_on", [(1.0, v["chp_el"]), (-cap_max, v["chp_on"])], "<=", 0.0)
        m.add_constraints("chp_semicontinuity", [(cfg.cascade_min_load, v["chp_on"]), (-1.0, v["chp_el"])],
                          "<=", 0.0)
        m.add_constraints("chp_on_requires_unit", [(1.0, v["chp_on"]), (-1.0, v["bin_fix_chp"])], "<=", 0.0)
        m.add_row(
            "chp_fullload_cap",
            [(w, v[k]) for k in subsidised] + [(-budget, v["cap_chp"])],
            "<=",
            0.0,
        )
        if cap_max > policy.chp_capacity_subsidy_limit:
            raise ValueError("cascading mode requires chp_max_capacity <= the CHP subsidy capacity limit")


def add_chp_levy_threshold(bm: BuiltModel) -> None:
    """De-minimis exemption: small units with little self-consumption pay no levy on it."""
    m, v, w = bm.model, bm.v, bm.weights
    policy = bm.scenario.policy
    cap_max = capacity_upper_bounds(bm.scenario)["chp"]
    v["bin_chp_levy"] = np.asarray(m.add_var("bin_chp_levy", binary=True, tag="levy binary"))
    big_m = max(cap_max - policy.chp_levy_capacity_limit, 0.0)
    m.add_constraint("chp_levy_capacity", [v["cap_chp"], v["bin_chp_levy"]], [1.0, -big_m], "<=",
                     policy.chp_levy_capacity_limit)
    e_lim = policy.chp_levy_energy_limit * 1000.0
    m.add_row(
        "chp_levy_energy",
        [(w, v["chp_hp"]), (w, v["chp_bat"]), (-w, v["chp_levy"]), (e_lim, v["bin_chp_levy"])],
        "<=",
        e_lim,
    )


def _cyclic_next(bm: BuiltModel) -> np.ndarray:
    nxt = np.arange(bm.hours) + 1
    for s, e in bm.config.time_slice.block_ranges():
        nxt[e - 1] = s
    return nxt


def add_heat_pump_and_balances(bm: BuiltModel) -> None:
    """Heat pump conversion, electricity and heat balances, storage dynamics and capacity bounds."""
    m, v = bm.model, bm.v
    t = bm.scenario.tech
    cfg = bm.config
    nxt = _cyclic_next(bm)

    m.add_constraints(
        "hp_conversion",
        [(1.0, v["q_hp"]), (-bm.cop, v["pv_hp"]), (-bm.cop, v["chp_hp"]), (-bm.cop, v["grid_hp"])],
        "==",
        0.0,
    )
    m.add_constraints("hp_capacity", [(1.0, v["q_hp"]), (-1.0, v["cap_hp"])], "<=", 0.0)
    m.add_constraints("boiler_capacity", [(1.0, v["q_boiler"]), (-1.0, v["cap_boiler"])], "<=", 0.0)

    el_terms = [(1.0, v[k]) for k in ("pv_te", "chp_te", "chp_te_wo", "bat_dis", "grid_te")]
    demand = bm.el_demand.copy()
    if cfg.ev_mode == "fixed":
        demand = demand + bm.ev_demand
    elif cfg.ev_mode == "optimized":
        el_terms.append((-1.0, v["ev_charge"].T))
    m.add_constraints("el_balance", el_terms, "==", demand)
    ll_terms = [(1.0, v["grid_ll"]), (-1.0, v["grid_hp"])]
    if cfg.is_tenant_electricity:
        ll_terms.append((-1.0, v["grid_te"]))
    m.add_constraints("grid_ll_balance", ll_terms, "==", 0.0)

    m.add_constraints(
        "heat_balance",
        [(1.0 / t.chp_power_to_heat, v["chp_el"]), (1.0, v["q_boiler"]), (1.0, v["q_hp"]),
         (1.0, v["hs_dis"]), (-1.0, v["hs_ch"])],
        "==",
        bm.heat_demand,
    )

    # heat storage
    m.add_constraints(
        "hs_dynamics",
        [(1.0, v["hs_lvl"][nxt]), (-(1.0 - t.heat_storage_loss_rate), v["hs_lvl"]),
         (-t.heat_storage_charge_efficiency, v["hs_ch"]), (1.0 / t.heat_storage_discharge_efficiency, v["hs_dis"])],
        "==",
        0.0,
    )
    m.add_constraints("hs_level_limit", [(1.0, v["hs_lvl"]), (-1.0, v["cap_heat_storage"])], "<=", 0.0)
    m.add_constraints("hs_charge_limit", [(1.0, v["hs_ch"]), (-t.heat_storage_c_rate, v["cap_heat_storage"])],
                      "<=", 0.0)
    m.add_constraints("hs_discharge_limit", [(1.0, v["hs_dis"]), (-t.heat_storage_c_rate, v["cap_heat_storage"])],
                      "<=", 0.0)

    # battery: charged from on-site generation only, discharged to tenants
    m.add_constraints(
        "bat_dynamics",
        [(1.0, v["bat_lvl"][nxt]), (-(1.0 - t.battery_loss_rate), v["bat_lvl"]),
         (-t.battery_charge_efficiency, v["pv_bat"]), (-t.battery_charge_efficiency, v["chp_bat"]),
         (1.0 / t.battery_discharge_efficiency, v["bat_dis"])],
        "==",
        0.0,
    )
    m.add_constraints("bat_level_limit", [(1.0, v["bat_lvl"]), (-1.0, v["cap_battery"])], "<=", 0.0)
    m.add_constraints("bat_charge_limit",
                      [(1.0, v["pv_bat"]), (1.0, v["chp_bat"]), (-t.battery_c_rate, v["cap_battery"])], "<=", 0.0)
    m.add_constraints("bat_discharge_limit", [(1.0, v["bat_dis"]), (-t.battery_c_rate, v["cap_battery"])],
                      "<=", 0.0)


def week_blocks(bm: BuiltModel) -> list[tuple[int, int]]:
    """168-hour chunks inside each time-slice block (the last chunk of a block may be shorter)."""
    out = []
    for s, e in bm.config.time_slice.block_ranges():
        out.extend((a, min(a + 168, e)) for a in range(s, e, 168))
    return out


def add_ev_charging(bm: BuiltModel) -> None:
    """Optimised charging: per vehicle and week the charged energy equals the profile's energy."""
    if bm.config.ev_mode != "optimized":
        return
    m, v = bm.model, bm.v
    idx = bm.config.time_slice.index()
    evs = bm.scenario.building.ev_profiles
    demand = np.array([_slice_profile(ev.demand, idx, "EV") for ev in evs])
    blocks = week_blocks(bm)
    width = max(e - s for s, e in blocks)
    # pad short chunks with zero-coefficient references to their first hour
    cols = np.array([[s + min(j, e - s - 1) for j in range(width)] for s, e in blocks])
    mask = np.array([[1.0 if j < e - s else 0.0 for j in range(width)] for s, e in blocks])
    for k in range(len(evs)):
        energy = np.array([demand[k, s:e].sum() for s, e in blocks])
        m.add_constraints(f"ev_weekly_energy_{k}", [(mask, v["ev_charge"][k][cols])], "==", energy)


def build_objective(bm: BuiltModel) -> None:
    """NPV: discounted annual cash flows of the representative year minus discounted investments."""
    v, w, book = bm.v, bm.weights, bm.book
    scn, cfg = bm.scenario, bm.config
    econ, policy, tech = scn.econ, scn.policy, scn.tech
    D = book.discounted_sum(1.0)
    c_te = book.discounted_sum(book.tenant_price)
    c_ll = book.discounted_sum(book.landlord_grid_price)
    fees = book.discounted_sum(book.tenant_fee_rate)
    gas = book.discounted_sum(book.gas_price)
    levy = book.discounted_sum(book.rel_levy)

    # capacities: investment and O&M
    for name in CAPACITY_UNITS:
        cost = tech.cost(name)
        fixed = cost.fixed_investment
        if name == "chp" and cfg.chp_mode == "cascading":
            fixed *= cfg.cascade_unit_count
        bm.objective(f"investment_{name}", v[f"cap_{name}"], -cost.variable_investment * investment_factor(cost, econ))
        bm.objective(f"investment_{name}", v[f"bin_fix_{name}"], -fixed)
        bm.objective("om", v[f"cap_{name}"], -cost.om_rate * D)

    # electricity sold to tenants from on-site sources
    for k in ("pv_te", "chp_te", "chp_te_wo", "bat_dis"):
        bm.objective("tenant_sales", v[k], w * c_te)
        bm.objective("fees", v[k], -w * fees)
    if cfg.is_tenant_electricity:
        bm.objective("grid_trade", v["grid_te"], w * c_te)
    bm.objective("grid_trade", v["grid_ll"], -w * c_ll)

    # PV remuneration per scheme
    feed = np.array([s.feed_in for s in bm.schemes])
    scp = np.array([s.scp for s in bm.schemes])
    # the levy rate is held constant over the horizon
    levy_per_scheme = np.array([s.self_consumption_levy for s in bm.schemes]) * D
    if cfg.pv_scheme_flows == "aggregate":
        bm.objective("scp", v["pv_scheme_te"], scp * D)
        bm.objective("feed_in", v["pv_scheme_grid"], feed * D)
        bm.objective("levy", v["pv_scheme_self"], -levy_per_scheme)
    else:
        bm.objective("scp", v["pv_scheme_te"], (scp * D)[:, None] * w[None, :])
        bm.objective("feed_in", v["pv_scheme_grid"], (feed * D)[:, None] * w[None, :])
        bm.objective("levy", v["pv_scheme_self"], -levy_per_scheme[:, None] * w[None, :])

    # CHP remuneration, levy and fuel
    bm.objective("feed_in", v["chp_grid"], w * policy.chp_feed_in * D)
    bm.objective("scp", v["chp_te"], w * policy.chp_scp * D)
    bm.objective("scp", v["chp_self"], w * policy.chp_scp * D)
    bm.objective("levy", v["chp_levy"], -w * policy.chp_levy_share * levy)
    bm.objective("fuel", v["chp_el"], -w * gas / tech.chp_el_efficiency)

    # heat sold at boiler cost; boiler fuel
    bm.objective("fuel", v["q_boiler"], -w * gas / tech.boiler_efficiency)
    bm.constant("heat_revenue", float(np.sum(w * bm.heat_demand)) * gas / tech.boiler_efficiency)


CASH_FLOW_CATEGORIES = (
    *(f"investment_{k}" for k in CAPACITY_UNITS),
    "om",
    "fuel",
    "tenant_sales",
    "fees",
    "feed_in",
    "scp",
    "levy",
    "grid_trade",
    "heat_revenue",
)
