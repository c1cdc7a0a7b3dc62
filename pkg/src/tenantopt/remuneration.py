"""Tariffs, premiums, fees and yearly price escalation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import EconomicParams, EmissionParams, PolicyRuleSet, PvTier, TechnologyParams


@dataclass(frozen=True)
class PvRemunerationScheme:
    index: int
    capacity_lower_limit: float
    capacity_upper_limit: float
    feed_in: float
    scp: float
    self_consumption_levy: float

    @property
    def mean_capacity(self) -> float:
        return 0.5 * (self.capacity_lower_limit + self.capacity_upper_limit)


def _check_tiers(tiers: Sequence[PvTier]) -> None:
    if not tiers:
        raise ValueError("at least one PV tier is required")
    limits = [t.capacity_limit for t in tiers]
    if limits[0] <= 0 or any(b <= a for a, b in zip(limits, limits[1:])):
        raise ValueError(f"PV tier limits must be positive and strictly increasing, got {limits}")


def blended_tariff(tiers: Sequence[PvTier], capacity: float, attr: str = "feed_in") -> float:
    """Capacity-weighted tariff of a PV system spanning several statutory tiers.

    Each tier contributes its price in proportion to the share of ``capacity``
    that falls inside it. For capacity <= first limit the first-tier price is
    returned unchanged (also the limit as capacity -> 0).
    """
    _check_tiers(tiers)
    if capacity <= tiers[0].capacity_limit:
        return float(getattr(tiers[0], attr))
    total = 0.0
    lower = 0.0
    for tier in tiers:
        width = min(capacity, tier.capacity_limit) - lower
        if width <= 0:
            break
        total += width * getattr(tier, attr)
        lower = tier.capacity_limit
    if capacity > tiers[-1].capacity_limit:
        raise ValueError(f"capacity {capacity} exceeds last tier limit {tiers[-1].capacity_limit}")
    return total / capacity


def scheme_bands(first_limit: float, scheme_count: int, max_capacity: float) -> list[tuple[float, float]]:
    """Capacity bands: the first ends at the first tier limit, the rest split evenly."""
    if scheme_count < 1:
        raise ValueError("scheme_count must be >= 1")
    if scheme_count == 1:
        return [(0.0, float(max_capacity))]
    if first_limit >= max_capacity:
        edges = np.linspace(0.0, max_capacity, scheme_count + 1)
    else:
        edges = np.concatenate([[0.0], np.linspace(first_limit, max_capacity, scheme_count)])
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def build_pv_scheme_table(
    policy: PolicyRuleSet,
    scheme_count: int = 19,
    max_capacity: float = 100.0,
    *,
    rel_levy: float = 0.065,
) -> list[PvRemunerationScheme]:
    """Discretised PV remuneration schemes, each priced at its band's mean capacity.

    Schemes whose mean capacity exceeds the levy threshold pay
    ``policy.pv_levy_share * rel_levy`` on PV self-consumption (heat pump, battery).
    """
    _check_tiers(policy.pv_tiers)
    if max_capacity > policy.pv_tiers[-1].capacity_limit:
        raise ValueError("max_capacity exceeds the last PV tier limit")
    table = []
    for k, (lo, hi) in enumerate(scheme_bands(policy.pv_tiers[0].capacity_limit, scheme_count, max_capacity)):
        mean = 0.5 * (lo + hi)
        levy = policy.pv_levy_share * rel_levy if mean > policy.pv_levy_capacity_threshold else 0.0
        table.append(
            PvRemunerationScheme(
                index=k + 1,
                capacity_lower_limit=lo,
                capacity_upper_limit=hi,
                feed_in=blended_tariff(policy.pv_tiers, mean, "feed_in"),
                scp=blended_tariff(policy.pv_tiers, mean, "scp"),
                self_consumption_levy=levy,
            )
        )
    return table


def tenant_fee_rate(econ: EconomicParams, year: int = 0) -> float:
    """Fees avoided on electricity sold to tenants in ``year``: levy + VAT share + metering."""
    if not 0 <= year < max(econ.horizon_years, 1):
        raise ValueError(f"year {year} outside horizon")
    gross = econ.tenant_price * (1.0 + econ.price_change_rate) ** year
    return econ.rel_levy + gross * econ.vat_rate / (1.0 + econ.vat_rate) + econ.metering_invoicing_cost


@dataclass(frozen=True)
class YearlyPriceBook:
    years: np.ndarray
    landlord_grid_price: np.ndarray
    tenant_price: np.ndarray
    gas_price: np.ndarray
    tenant_fee_rate: np.ndarray
    rel_levy: np.ndarray
    co2_price: np.ndarray
    discount_factors: np.ndarray

    def __len__(self) -> int:
        return len(self.years)

    def discounted_sum(self, prices: np.ndarray | float) -> float:
        """Sum over years of price(a) / (1+i)^a."""
        return float(np.sum(np.broadcast_to(prices, self.discount_factors.shape) * self.discount_factors))


def co2_surcharge(co2_price_eur_per_t: float, emission_factor_g_per_kwh: float) -> float:
    return co2_price_eur_per_t * emission_factor_g_per_kwh * 1e-6


def gas_base_from_gross(gross_price: float, co2_price: float, emission_factor: float) -> float:
    """Net-of-CO2 gas price from a gross price that already contains the surcharge."""
    return gross_price - co2_surcharge(co2_price, emission_factor)


def build_price_book(econ: EconomicParams, emis: EmissionParams) -> YearlyPriceBook:
    a = np.arange(econ.horizon_years)
    years = econ.start_year + a
    missing = [int(y) for y in years if int(y) not in econ.co2_price_schedule]
    if missing:
        raise KeyError(f"CO2 price schedule has no entry for year(s) {missing}")
    growth = (1.0 + econ.price_change_rate) ** a
    co2 = np.array([econ.co2_price_schedule[int(y)] for y in years], dtype=float)
    tenant = econ.tenant_price * growth
    fees = econ.rel_levy + tenant * econ.vat_rate / (1.0 + econ.vat_rate) + econ.metering_invoicing_cost
    return YearlyPriceBook(
        years=years,
        landlord_grid_price=econ.landlord_grid_price * growth,
        tenant_price=tenant,
        gas_price=econ.gas_base_price * growth + co2 * emis.gas_emission_factor * 1e-6,
        tenant_fee_rate=fees,
        rel_levy=np.full(len(a), econ.rel_levy),
        co2_price=co2,
        discount_factors=(1.0 + econ.discount_rate) ** -a.astype(float),
    )


def chp_per_kwh_earnings(
    mode: str,
    econ: EconomicParams,
    policy: PolicyRuleSet,
    tech: TechnologyParams,
    cop: float | None = None,
    *,
    emis: EmissionParams | None = None,
    year: int = 0,
) -> float:
    """Marginal first-year earning per kWh_el of CHP output, heat co-product included.

    ``mode`` is ``"feedIn"`` (electricity exported), ``"tenant"`` (sold to
    tenants) or ``"heatPump"`` (converted to heat at ``cop``). Heat is valued at
    the gas cost of the boiler it displaces.
    """
    book = build_price_book(econ, emis or EmissionParams())
    gas = book.gas_price[year]
    heat_value = gas / tech.boiler_efficiency
    fuel_cost = gas / tech.chp_el_efficiency
    co_heat = 1.0 / tech.chp_power_to_heat
    if mode == "feedIn":
        return co_heat * heat_value + policy.chp_feed_in - fuel_cost
    if mode == "tenant":
        margin = book.tenant_price[year] + policy.chp_scp - book.tenant_fee_rate[year]
        return co_heat * heat_value + margin - fuel_cost
    if mode == "heatPump":
        if cop is None:
            raise ValueError("heatPump mode needs a COP")
        levy = policy.chp_levy_share * book.rel_levy[year]
        return (co_heat + cop) * heat_value + policy.chp_scp - levy - fuel_cost
    raise ValueError(f"unknown mode {mode!r}")


def break_even_cop(
    econ: EconomicParams,
    policy: PolicyRuleSet,
    tech: TechnologyParams,
    *,
    emis: EmissionParams | None = None,
    year: int = 0,
) -> float:
    """COP above which routing CHP power to the heat pump beats selling it to tenants."""
    book = build_price_book(econ, emis or EmissionParams())
    heat_value = book.gas_price[year] / tech.boiler_efficiency
    gap = book.tenant_price[year] - book.tenant_fee_rate[year] + policy.chp_levy_share * book.rel_levy[year]
    return gap / heat_value
