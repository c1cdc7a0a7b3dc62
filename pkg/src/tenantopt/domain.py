"""Physical, economic, policy and emission parameters plus the hourly data model.

Units are fixed throughout the package: kW / kWh for power and energy, EUR for
money, EUR/kWh for every tariff, gCO2/kWh for emission factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np

HOURS_PER_YEAR = 8760

TECHNOLOGIES = ("pv", "inverter", "chp", "hp", "boiler", "heat_storage", "battery")


@dataclass(frozen=True, eq=False)
class HourlyProfile:
    """Per-hour values for the representative year.

    The array is stored read-only. Length is *not* enforced here so that
    malformed inputs can be reported by :func:`validate_scenario`.
    """

    values: np.ndarray
    unit: str = ""
    name: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, HourlyProfile):
            return NotImplemented
        return (
            self.unit == other.unit
            and self.name == other.name
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    @property
    def annual_sum(self) -> float:
        return float(self.values.sum())

    def scaled(self, factor: float) -> "HourlyProfile":
        return HourlyProfile(self.values * factor, self.unit, self.name)


@dataclass(frozen=True)
class EvProfile:
    """Charging demand of one vehicle; ``available`` flags hours at the charger."""

    demand: HourlyProfile
    available: HourlyProfile | None = None


@dataclass(frozen=True)
class Building:
    name: str
    electricity_demand: HourlyProfile
    heat_demand: HourlyProfile
    roof_area: float
    living_area: float = 0.0
    occupants: int = 0
    ev_profiles: tuple[EvProfile, ...] = ()
    cop: HourlyProfile | None = None
    pv_yield: HourlyProfile | None = None


@dataclass(frozen=True)
class TechCost:
    fixed_investment: float
    variable_investment: float
    om_rate: float
    lifetime: int
    price_change_rate: float = 0.0


def _default_costs() -> dict[str, TechCost]:
    # Investment figures from the input-data tables; lifetimes and O&M rates are
    # not published and are set to typical values (override per scenario).
    return {
        "pv": TechCost(0.0, 1194.39, 17.9, 25),
        "inverter": TechCost(0.0, 250.0, 0.0, 15),
        "chp": TechCost(15000.0, 970.30, 29.1, 15),
        "hp": TechCost(5000.0, 582.0, 8.7, 20),
        "boiler": TechCost(0.0, 175.0, 3.5, 20),
        "heat_storage": TechCost(500.0, 25.0, 0.0, 20),
        "battery": TechCost(2000.0, 530.84, 0.0, 15),
    }


@dataclass(frozen=True)
class TechnologyParams:
    costs: Mapping[str, TechCost] = field(default_factory=_default_costs)
    chp_el_efficiency: float = 0.35
    # 0.35 / 0.60; printed as 0.58 in the input table
    chp_th_efficiency: float = 0.35 / 0.60
    chp_power_to_heat: float = 0.60
    chp_min_load_factor: float = 0.40
    chp_max_capacity: float = 50.0
    boiler_efficiency: float = 0.85
    heat_storage_charge_efficiency: float = 0.99
    heat_storage_discharge_efficiency: float = 0.99
    heat_storage_loss_rate: float = 0.001
    heat_storage_c_rate: float = 1.0
    battery_charge_efficiency: float = 0.95
    battery_discharge_efficiency: float = 0.95
    battery_loss_rate: float = 0.0001
    battery_c_rate: float = 1.0
    pv_area_density: float = 0.167
    ev_charger_power: float = 11.0
    # None -> derived from the building's peak heat demand
    hp_max_capacity: float | None = None
    boiler_max_capacity: float | None = None
    heat_storage_max_capacity: float = 400.0
    battery_max_capacity: float = 200.0

    def cost(self, tech: str) -> TechCost:
        return self.costs[tech]

    def with_cost(self, tech: str, **changes) -> "TechnologyParams":
        costs = dict(self.costs)
        costs[tech] = replace(costs[tech], **changes)
        return replace(self, costs=costs)


def _default_co2_schedule() -> dict[int, float]:
    prices = {2021: 25, 2022: 30, 2023: 35, 2024: 45}
    prices.update({y: 55 for y in range(2025, 2030)})
    prices.update({y: 65 for y in range(2030, 2035)})
    prices.update({y: 75 for y in range(2035, 2041)})
    return {y: float(p) for y, p in prices.items()}


@dataclass(frozen=True)
class EconomicParams:
    horizon_years: int = 20
    discount_rate: float = 0.04
    price_change_rate: float = 0.02
    landlord_grid_price: float = 0.2973
    tenant_price: float = 0.3293
    # 2021 gas price 0.0633 EUR/kWh minus the 25 EUR/t CO2 surcharge at 201 g/kWh
    gas_base_price: float = 0.0633 - 25.0 * 201.0e-6
    co2_price_schedule: Mapping[int, float] = field(default_factory=_default_co2_schedule)
    start_year: int = 2021
    vat_rate: float = 0.19
    rel_levy: float = 0.065
    metering_invoicing_cost: float = 0.0061


@dataclass(frozen=True)
class PvTier:
    capacity_limit: float
    feed_in: float
    scp: float


@dataclass(frozen=True)
class PolicyRuleSet:
    vintage: str
    pv_tiers: tuple[PvTier, ...]
    chp_feed_in: float
    chp_scp: float
    chp_subsidized_full_load_hours: float
    pv_levy_capacity_threshold: float = 30.0
    pv_levy_energy_threshold: float = 30.0  # MWh/a
    pv_levy_share: float = 0.40
    chp_capacity_subsidy_limit: float = 50.0
    chp_levy_capacity_limit: float = 10.0
    chp_levy_energy_limit: float = 10.0  # MWh/a
    chp_levy_share: float = 0.40

    @classmethod
    def tel2021(cls) -> "PolicyRuleSet":
        return cls(
            vintage="TEL2021",
            pv_tiers=(
                PvTier(10.0, 0.0856, 0.0379),
                PvTier(40.0, 0.0833, 0.0352),
                PvTier(750.0, 0.0662, 0.0237),
            ),
            chp_feed_in=0.1600,
            chp_scp=0.0800,
            chp_subsidized_full_load_hours=30000.0,
        )

    @classmethod
    def tel2020(cls) -> "PolicyRuleSet":
        return cls(
            vintage="TEL2020",
            pv_tiers=(
                PvTier(10.0, 0.0903, 0.0053),
                PvTier(40.0, 0.0878, 0.0028),
                PvTier(750.0, 0.0689, -0.0111),
            ),
            chp_feed_in=0.1166,
            chp_scp=0.0410,
            chp_subsidized_full_load_hours=45000.0,
        )

    @classmethod
    def by_vintage(cls, vintage: str | int) -> "PolicyRuleSet":
        key = str(vintage).upper().replace("TEL", "").replace("-", "")
        if key == "2021":
            return cls.tel2021()
        if key == "2020":
            return cls.tel2020()
        raise ValueError(f"unknown policy vintage {vintage!r}")

    def without_subsidies(self) -> "PolicyRuleSet":
        """Same thresholds and levies, every premium and feed-in tariff set to zero."""
        tiers = tuple(PvTier(t.capacity_limit, 0.0, 0.0) for t in self.pv_tiers)
        return replace(self, vintage=f"{self.vintage}-nosubsidy", pv_tiers=tiers, chp_feed_in=0.0, chp_scp=0.0)


@dataclass(frozen=True)
class EmissionParams:
    grid_emission_factor: float = 401.0
    grid_emission_decline_rate: float = 0.06
    gas_emission_factor: float = 201.0
    pv_emission_factor: float = 0.0
    alt_electric_efficiency: float = 0.40
    alt_thermal_efficiency: float = 0.80
    # years between the grid factor's base year (2019) and the first model year
    grid_factor_year_offset: int = 2


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    field: str
    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __str__(self) -> str:
        if self.passed:
            return "validation passed"
        return "\n".join(f"{v.field}: [{v.kind}] {v.message}" for v in self.violations)


def _check_profile(out: list, label: str, prof: HourlyProfile | None, require_positive_sum=True):
    if prof is None:
        return
    if len(prof) != HOURS_PER_YEAR:
        out.append(Violation(label, "length", f"expected {HOURS_PER_YEAR} values, got {len(prof)}"))
    vals = prof.values
    if not np.all(np.isfinite(vals)):
        out.append(Violation(label, "finite", "profile contains non-finite values"))
    neg = np.flatnonzero(vals < 0)
    if neg.size:
        out.append(Violation(label, "non-negative", f"negative value at hour {int(neg[0])} ({neg.size} hours)"))
    if require_positive_sum and not prof.annual_sum > 0:
        out.append(Violation(label, "positive-sum", "annual sum must be positive"))


def _in_unit_interval(out, label, value, closed_low=False):
    ok = (0 <= value <= 1) if closed_low else (0 < value <= 1)
    if not ok:
        interval = "[0, 1]" if closed_low else "(0, 1]"
        out.append(Violation(label, "range", f"{value} not in {interval}"))


def validate_scenario(
    building: Building,
    tech: TechnologyParams,
    econ: EconomicParams,
    policy: PolicyRuleSet,
    emis: EmissionParams,
) -> ValidationReport:
    """Check every documented invariant; returns one entry per violation."""
    out: list[Violation] = []

    _check_profile(out, "building.electricity_demand", building.electricity_demand)
    _check_profile(out, "building.heat_demand", building.heat_demand)
    _check_profile(out, "building.cop", building.cop)
    _check_profile(out, "building.pv_yield", building.pv_yield)
    for k, ev in enumerate(building.ev_profiles):
        _check_profile(out, f"building.ev_profiles[{k}].demand", ev.demand)
        _check_profile(out, f"building.ev_profiles[{k}].available", ev.available, require_positive_sum=False)
    if not building.roof_area > 0:
        out.append(Violation("building.roof_area", "range", "roof area must be positive"))

    for name, c in tech.costs.items():
        if c.lifetime < 1:
            out.append(Violation(f"tech.costs.{name}.lifetime", "range", "lifetime must be >= 1 year"))
        if c.fixed_investment < 0 or c.variable_investment < 0 or c.om_rate < 0:
            out.append(Violation(f"tech.costs.{name}", "non-negative", "costs must be non-negative"))
    missing = set(TECHNOLOGIES) - set(tech.costs)
    if missing:
        out.append(Violation("tech.costs", "missing", f"no cost data for {sorted(missing)}"))
    for label in (
        "chp_el_efficiency",
        "chp_th_efficiency",
        "boiler_efficiency",
        "heat_storage_charge_efficiency",
        "heat_storage_discharge_efficiency",
        "battery_charge_efficiency",
        "battery_discharge_efficiency",
        "chp_min_load_factor",
    ):
        _in_unit_interval(out, f"tech.{label}", getattr(tech, label))
    for label in ("heat_storage_loss_rate", "battery_loss_rate"):
        v = getattr(tech, label)
        if not 0 <= v < 1:
            out.append(Violation(f"tech.{label}", "range", f"{v} not in [0, 1)"))
    if tech.chp_el_efficiency > 0 and tech.chp_th_efficiency > 0:
        ratio = tech.chp_el_efficiency / tech.chp_th_efficiency
        if abs(ratio - tech.chp_power_to_heat) > 1e-6:
            out.append(
                Violation(
                    "tech.chp_power_to_heat",
                    "consistency",
                    f"power-to-heat {tech.chp_power_to_heat} != el/th efficiency ratio {ratio:.6f}",
                )
            )

    if econ.horizon_years < 1:
        out.append(Violation("econ.horizon_years", "range", "horizon must be >= 1 year"))
    if econ.discount_rate < 0:
        out.append(Violation("econ.discount_rate", "range", "discount rate must be >= 0"))
    if econ.tenant_price < econ.landlord_grid_price:
        out.append(Violation("econ.tenant_price", "ordering", "tenant price below landlord grid price"))
    for y in range(econ.start_year, econ.start_year + econ.horizon_years):
        if y not in econ.co2_price_schedule:
            out.append(Violation("econ.co2_price_schedule", "missing", f"no CO2 price for {y}"))
            break

    limits = [t.capacity_limit for t in policy.pv_tiers]
    if not limits or any(b <= a for a, b in zip(limits, limits[1:])) or limits[0] <= 0:
        out.append(Violation("policy.pv_tiers", "ordering", "tier capacity limits must be positive and increasing"))
    # PV self-consumption premiums may legitimately be negative (2020 tier 3)
    if any(t.feed_in < 0 for t in policy.pv_tiers) or policy.chp_feed_in < 0 or policy.chp_scp < 0:
        out.append(Violation("policy", "non-negative", "feed-in tariffs and CHP premium must be >= 0"))

    for label in ("grid_emission_factor", "gas_emission_factor", "pv_emission_factor"):
        if getattr(emis, label) < 0:
            out.append(Violation(f"emis.{label}", "non-negative", "emission factors must be >= 0"))
    if not 0 <= emis.grid_emission_decline_rate < 1:
        out.append(Violation("emis.grid_emission_decline_rate", "range", "decline rate not in [0, 1)"))
    _in_unit_interval(out, "emis.alt_electric_efficiency", emis.alt_electric_efficiency)
    _in_unit_interval(out, "emis.alt_thermal_efficiency", emis.alt_thermal_efficiency)

    return ValidationReport(tuple(out))


# --------------------------------------------------------------------------
# plain-dict (de)serialisation used by the scenario file format


def _plain(value):
    if isinstance(value, HourlyProfile):
        return {"values": [float(v) for v in value.values], "unit": value.unit, "name": value.name}
    if isinstance(value, (EvProfile, Building, TechCost, TechnologyParams, EconomicParams, PvTier,
                          PolicyRuleSet, EmissionParams)):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def to_dict(obj) -> dict:
    """Convert a domain object into nested builtin types (YAML/JSON friendly)."""
    return _plain(obj)


def _profile(d) -> HourlyProfile | None:
    if d is None:
        return None
    return HourlyProfile(np.asarray(d["values"], dtype=float), d.get("unit", ""), d.get("name", ""))


def from_dict(cls, data: Mapping):
    """Inverse of :func:`to_dict` for the given domain class."""
    if cls is HourlyProfile:
        return _profile(data)
    if cls is TechCost:
        return TechCost(**data)
    if cls is PvTier:
        return PvTier(**data)
    if cls is TechnologyParams:
        d = dict(data)
        if "costs" in d:
            d["costs"] = {k: TechCost(**v) for k, v in d["costs"].items()}
        return TechnologyParams(**d)
    if cls is EconomicParams:
        d = dict(data)
        if "co2_price_schedule" in d:
            d["co2_price_schedule"] = {int(k): float(v) for k, v in d["co2_price_schedule"].items()}
        return EconomicParams(**d)
    if cls is PolicyRuleSet:
        d = dict(data)
        d["pv_tiers"] = tuple(PvTier(**t) for t in d["pv_tiers"])
        return PolicyRuleSet(**d)
    if cls is EmissionParams:
        return EmissionParams(**data)
    if cls is EvProfile:
        return EvProfile(_profile(data["demand"]), _profile(data.get("available")))
    if cls is Building:
        d = dict(data)
        for key in ("electricity_demand", "heat_demand", "cop", "pv_yield"):
            if key in d:
                d[key] = _profile(d[key])
        d["ev_profiles"] = tuple(from_dict(EvProfile, e) for e in d.get("ev_profiles", ()))
        return Building(**d)
    raise TypeError(f"no deserialiser for {cls!r}")


def approx_equal(a, b, tol: float = 1e-12) -> bool:
    """Field-by-field comparison of two domain objects with an absolute float tolerance."""
    pa, pb = _plain(a), _plain(b)
    return _approx(pa, pb, tol)


def _approx(a, b, tol) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_approx(a[k], b[k], tol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_approx(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        if a is None or b is None:
            return a is b
        return math.isclose(float(a), float(b), rel_tol=0, abs_tol=tol)
    return a == b


def peak(values: Sequence[float] | np.ndarray) -> float:
    arr = np.asarray(values, dtype=float)
    return float(arr.max()) if arr.size else 0.0
