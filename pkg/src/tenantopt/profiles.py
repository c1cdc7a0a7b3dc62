"""Deterministic synthetic hourly profiles for the four reference buildings.

Measured apartment-level profiles are not redistributable, so the bundled
files are produced here from a seeded generator: a sinusoidal outdoor
temperature with daily noise drives space heat and the heat pump COP, a
clear-sky sine with random daily cloudiness drives PV yield, and a weekly
commuting pattern drives EV charging. Every profile is rescaled to the
building's published annual total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import HOURS_PER_YEAR

EV_COUNT = 6
EV_ANNUAL_KWH = 7000.0
PV_SPECIFIC_YIELD = 1000.0  # kWh per kWp and year
HP_SINK_TEMPERATURE = 55.0  # degC
HP_CARNOT_FRACTION = 0.40
COP_BOUNDS = (1.6, 5.0)
EV_CHARGE_POWER = 3.7  # kW, uncontrolled charging after arrival


@dataclass(frozen=True)
class BuildingSpec:
    name: str
    electricity_mwh: float
    heat_mwh: float
    occupants: int
    roof_area: float
    living_area: float
    seed: int


BUILDINGS = (
    BuildingSpec("building-1", 29.8, 113.0, 24, 176.0, 376.5, 101),
    BuildingSpec("building-2", 31.5, 100.9, 29, 166.8, 446.8, 102),
    BuildingSpec("building-3", 31.5, 58.0, 26, 125.6, 431.3, 103),
    BuildingSpec("building-4", 30.0, 40.4, 26, 125.6, 431.3, 104),
)

WEATHER_SEED = 2021
EV_SEED = 7


def _hour_grid():
    h = np.arange(HOURS_PER_YEAR)
    return h, h // 24, h % 24


def outdoor_temperature(seed: int = WEATHER_SEED) -> np.ndarray:
    """Hourly outdoor temperature in degC: annual cosine, daily swing and AR(1) day noise."""
    rng = np.random.default_rng(seed)
    h, day, hod = _hour_grid()
    annual = 10.5 - 9.5 * np.cos(2 * np.pi * (day - 15) / 365)
    daily = 4.0 * np.cos(2 * np.pi * (hod - 15) / 24)
    noise = np.zeros(366)
    for d in range(1, 366):
        noise[d] = 0.7 * noise[d - 1] + rng.normal(0.0, 2.0)
    return annual + daily + noise[day]


def pv_yield(seed: int = WEATHER_SEED) -> np.ndarray:
    """Normalised PV output in kWh per kWp for every hour."""
    rng = np.random.default_rng(seed + 1)
    h, day, hod = _hour_grid()
    daylen = 12.0 - 4.0 * np.cos(2 * np.pi * (day + 10) / 365)
    sunrise = 12.5 - daylen / 2
    x = (hod + 0.5 - sunrise) / daylen
    elevation = np.where((x > 0) & (x < 1), np.sin(np.pi * np.clip(x, 0, 1)), 0.0)
    season = 0.55 + 0.45 * np.sin(np.pi * np.clip((day - 20) / 330, 0, 1))
    cloud = rng.beta(2.2, 1.3, size=366)[day]
    raw = elevation**1.3 * season * (0.15 + 0.85 * cloud)
    return raw * PV_SPECIFIC_YIELD / raw.sum()


def heat_pump_cop(temperature: np.ndarray) -> np.ndarray:
    sink = HP_SINK_TEMPERATURE + 273.15
    source = temperature + 273.15
    cop = HP_CARNOT_FRACTION * sink / np.maximum(sink - source, 1.0)
    return np.clip(cop, *COP_BOUNDS)


def heat_demand(spec: BuildingSpec, temperature: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    h, day, hod = _hour_grid()
    space = np.maximum(15.0 - temperature, 0.0)
    # domestic hot water: about 15 % of the total, with morning and evening peaks
    dhw_shape = 1.0 + 1.2 * np.exp(-((hod - 7) ** 2) / 3.0) + 0.9 * np.exp(-((hod - 19) ** 2) / 4.0)
    dhw = dhw_shape * rng.uniform(0.8, 1.2, size=HOURS_PER_YEAR)
    total = spec.heat_mwh * 1000.0
    profile = 0.85 * total * space / space.sum() + 0.15 * total * dhw / dhw.sum()
    return profile


def electricity_demand(spec: BuildingSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed + 1000)
    h, day, hod = _hour_grid()
    shape = (
        0.55
        + 0.35 * np.exp(-((hod - 7.5) ** 2) / 2.5)
        + 0.75 * np.exp(-((hod - 19.5) ** 2) / 5.0)
        + 0.25 * np.exp(-((hod - 12.5) ** 2) / 4.0)
    )
    seasonal = 1.0 + 0.18 * np.cos(2 * np.pi * (day - 10) / 365)
    noise = rng.lognormal(0.0, 0.18, size=HOURS_PER_YEAR)
    raw = shape * seasonal * noise
    return raw * spec.electricity_mwh * 1000.0 / raw.sum()


def ev_profiles(seed: int = EV_SEED) -> tuple[np.ndarray, np.ndarray]:
    """Charging demand (kWh per hour) and availability (0/1) for each vehicle.

    One week per vehicle is generated and tiled over the year. Vehicles leave
    in the morning on working days and recharge at home on arrival.
    """
    rng = np.random.default_rng(seed)
    weekly_energy = EV_ANNUAL_KWH / EV_COUNT * 168.0 / HOURS_PER_YEAR
    demand = np.zeros((EV_COUNT, HOURS_PER_YEAR))
    available = np.ones((EV_COUNT, HOURS_PER_YEAR))
    for k in range(EV_COUNT):
        week_avail = np.ones(168)
        trips = []
        for d in range(7):
            drive = d < 5 or rng.random() < 0.5
            if not drive:
                continue
            leave = int(rng.integers(6, 10)) if d < 5 else int(rng.integers(9, 14))
            back = leave + (int(rng.integers(8, 11)) if d < 5 else int(rng.integers(3, 7)))
            week_avail[d * 24 + leave : d * 24 + back] = 0.0
            trips.append(d * 24 + back)
        share = rng.dirichlet(np.ones(len(trips))) * 0.5 + 0.5 / len(trips)
        week_demand = np.zeros(168)
        for arrival, part in zip(trips, share):
            energy = part * weekly_energy
            t = arrival
            while energy > 1e-12:
                step = min(EV_CHARGE_POWER, energy)
                week_demand[t % 168] += step
                energy -= step
                t += 1
        reps = int(np.ceil(HOURS_PER_YEAR / 168))
        demand[k] = np.tile(week_demand, reps)[:HOURS_PER_YEAR]
        available[k] = np.tile(week_avail, reps)[:HOURS_PER_YEAR]
    # charging happens at home, so charging hours are available by construction
    available = np.maximum(available, (demand > 0).astype(float))
    return demand, available


def building_profiles(spec: BuildingSpec) -> dict[str, np.ndarray]:
    """All columns of one bundled profile file, keyed by header name."""
    temp = outdoor_temperature()
    cols = {
        "el_demand_kWh": electricity_demand(spec),
        "heat_demand_kWh": heat_demand(spec, temp),
        "cop": heat_pump_cop(temp),
        "pv_yield_kWh_per_kWp": pv_yield(),
    }
    demand, available = ev_profiles()
    for k in range(EV_COUNT):
        cols[f"ev{k + 1}_kWh"] = demand[k]
    for k in range(EV_COUNT):
        cols[f"ev{k + 1}_available"] = available[k]
    return cols


def write_bundled(directory) -> None:
    """Regenerate the bundled profile files and the building table in ``directory``."""
    from pathlib import Path

    import yaml

    from .io import write_profiles

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    table = []
    for spec in BUILDINGS:
        write_profiles(out / f"{spec.name}.csv", building_profiles(spec))
        table.append({
            "name": spec.name,
            "file": f"{spec.name}.csv",
            "roof_area": spec.roof_area,
            "living_area": spec.living_area,
            "occupants": spec.occupants,
        })
    (out / "buildings.yaml").write_text(yaml.safe_dump({"buildings": table}, sort_keys=False))


if __name__ == "__main__":
    import sys

    write_bundled(sys.argv[1] if len(sys.argv) > 1 else "profiles")
