"""Profile files, scenario configuration and report emission."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema
import numpy as np
import yaml

from .builder import TimeSlice
from .domain import (
    HOURS_PER_YEAR,
    Building,
    EconomicParams,
    EmissionParams,
    EvProfile,
    HourlyProfile,
    PolicyRuleSet,
    TechCost,
    TechnologyParams,
    from_dict,
    to_dict,
)
from .engine import SCENARIO_TABLE, ScenarioResult, SharedParams
from .kpi import RESULT_COLUMNS, KpiReport
from .solver import SolveOptions

MANDATORY_COLUMNS = ("el_demand_kWh", "heat_demand_kWh")
OPTIONAL_COLUMNS = ("cop", "pv_yield_kWh_per_kWp")
PROFILE_DECIMALS = 6
REPORT_DECIMALS = 6


class ProfileError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# profiles


def load_profiles(path: str | Path, *, require_cop: bool = False) -> dict[str, HourlyProfile]:
    """Read an hourly profile file: ``hour`` column 0..8759 plus one column per profile.

    Units are part of the header (``el_demand_kWh``). Raises :class:`ProfileError`
    naming the file, and the line for cell-level problems.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ProfileError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ProfileError(f"{path}: file is empty") from None
        if "hour" not in header:
            raise ProfileError(f"{path}: missing column 'hour'")
        missing = [c for c in MANDATORY_COLUMNS if c not in header]
        if missing:
            raise ProfileError(f"{path}: missing mandatory column(s) {', '.join(missing)}")
        if len(set(header)) != len(header):
            raise ProfileError(f"{path}: duplicate column names")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ProfileError(f"{path}: line {line}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_number(c))
                raise ProfileError(f"{path}: line {line}: non-numeric cell {bad!r}") from None
    if len(rows) != HOURS_PER_YEAR:
        raise ProfileError(f"{path}: expected {HOURS_PER_YEAR} data rows, found {len(rows)}")
    table = np.array(rows)
    if not np.array_equal(table[:, header.index("hour")], np.arange(HOURS_PER_YEAR)):
        raise ProfileError(f"{path}: hour column must run 0..{HOURS_PER_YEAR - 1} in order")
    out = {}
    for j, name in enumerate(header):
        if name == "hour":
            continue
        col = table[:, j]
        if not np.all(np.isfinite(col)):
            raise ProfileError(f"{path}: column {name} has non-finite values")
        if np.any(col < 0):
            line = int(np.flatnonzero(col < 0)[0]) + 2
            raise ProfileError(f"{path}: line {line}: negative value in column {name}")
        out[name] = HourlyProfile(col, _unit(name), name)
    if require_cop:
        if "cop" not in out:
            raise ProfileError(f"{path}: heat pump enabled but no 'cop' column")
        low = np.flatnonzero(out["cop"].values < 1.0)
        if low.size:
            raise ProfileError(f"{path}: line {int(low[0]) + 2}: COP below 1")
    return out


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _unit(column: str) -> str:
    for suffix in ("kWh_per_kWp", "kWh"):
        if column.endswith("_" + suffix):
            return suffix.replace("_per_", "/")
    return ""


def write_profiles(path: str | Path, columns: Mapping[str, Sequence[float]]) -> None:
    """Write profiles in the format read by :func:`load_profiles`."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    for n, col in zip(names, data):
        if col.shape != (HOURS_PER_YEAR,):
            raise ValueError(f"column {n} must have {HOURS_PER_YEAR} values")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", *names])
        for t in range(HOURS_PER_YEAR):
            w.writerow([t, *(_fixed(col[t], PROFILE_DECIMALS) for col in data)])


def building_from_profiles(
    name: str,
    profiles: Mapping[str, HourlyProfile],
    roof_area: float,
    living_area: float = 0.0,
    occupants: int = 0,
) -> Building:
    evs = []
    k = 1
    while f"ev{k}_kWh" in profiles:
        evs.append(EvProfile(profiles[f"ev{k}_kWh"], profiles.get(f"ev{k}_available")))
        k += 1
    return Building(
        name=name,
        electricity_demand=profiles["el_demand_kWh"],
        heat_demand=profiles["heat_demand_kWh"],
        roof_area=roof_area,
        living_area=living_area,
        occupants=occupants,
        ev_profiles=tuple(evs),
        cop=profiles.get("cop"),
        pv_yield=profiles.get("pv_yield_kWh_per_kWp"),
    )


def _data_dir():
    return resources.files("tenantopt") / "data"


def bundled_building_table() -> list[dict]:
    with resources.as_file(_data_dir() / "buildings.yaml") as p:
        return yaml.safe_load(Path(p).read_text())["buildings"]


def load_bundled_building(name: str) -> Building:
    for entry in bundled_building_table():
        if entry["name"] == name:
            with resources.as_file(_data_dir() / entry["file"]) as p:
                profiles = load_profiles(p)
            return building_from_profiles(name, profiles, entry["roof_area"], entry["living_area"],
                                          entry["occupants"])
    known = ", ".join(e["name"] for e in bundled_building_table())
    raise KeyError(f"no bundled building {name!r}; known: {known}")


def bundled_scenario_path() -> Path:
    with resources.as_file(_data_dir() / "scenario.yaml") as p:
        return Path(p)


# ---------------------------------------------------------------------------
# scenario file

_JSON_TYPES = {int: "integer", float: "number", str: "string", bool: "boolean"}


def _override_schema(cls, skip=()) -> dict:
    props = {}
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        typ = str(f.type)
        if "Mapping" in typ or "dict" in typ:
            props[f.name] = {"type": "object"}
        elif "tuple" in typ:
            props[f.name] = {"type": "array"}
        elif "None" in typ:
            props[f.name] = {"type": ["number", "null"]}
        elif typ == "int":
            props[f.name] = {"type": "integer"}
        elif typ == "str":
            props[f.name] = {"type": "string"}
        else:
            props[f.name] = {"type": "number"}
    return {"type": "object", "properties": props, "additionalProperties": False}


def scenario_schema() -> dict:
    cost = _override_schema(TechCost)
    tech = _override_schema(TechnologyParams, skip=("costs",))
    tech["properties"]["costs"] = {
        "type": "object",
        "propertyNames": {"enum": list(TechnologyParams().costs)},
        "additionalProperties": cost,
    }
    econ = _override_schema(EconomicParams)
    econ["properties"]["co2_price_schedule"] = {
        "type": "object",
        "propertyNames": {"pattern": "^[0-9]{4}$"},
        "additionalProperties": {"type": "number"},
    }
    policy = _override_schema(PolicyRuleSet, skip=("vintage", "pv_tiers"))
    policy["properties"]["vintage"] = {"enum": ["TEL2020", "TEL2021", "2020", "2021"]}
    policy["properties"]["without_subsidies"] = {"type": "boolean"}
    policy["properties"]["pv_tiers"] = {
        "type": "array",
        "minItems": 1,
        "items": {
            "type": "object",
            "properties": {k: {"type": "number"} for k in ("capacity_limit", "feed_in", "scp")},
            "required": ["capacity_limit", "feed_in", "scp"],
            "additionalProperties": False,
        },
    }
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {
            "building": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "profiles": {"type": "string"},
                    "roof_area": {"type": "number", "minimum": 0},
                    "living_area": {"type": "number", "minimum": 0},
                    "occupants": {"type": "integer", "minimum": 0},
                },
                "required": ["name"],
                "additionalProperties": False,
            },
            "scenarios": {"type": "array", "items": {"enum": list(SCENARIO_TABLE)}},
            "chp_capacities": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            "time_slice": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["full_year", "representative_weeks", "first_hours"]},
                    "count": {"type": "integer", "minimum": 1},
                },
                "required": ["kind"],
                "additionalProperties": False,
            },
            "technology": tech,
            "economics": econ,
            "policy": policy,
            "emissions": _override_schema(EmissionParams),
            "solver": {
                "type": "object",
                "properties": {
                    "relative_gap": {"type": "number", "minimum": 0},
                    "time_limit": {"type": "number", "exclusiveMinimum": 0},
                    "threads": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer", "minimum": 0},
                    "backend": {"enum": ["highs", "scipy"]},
                },
                "additionalProperties": False,
            },
            "workers": {"type": "integer", "minimum": 1},
            "dispatch_days": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 364}},
            "output": {"type": "string"},
        },
        "required": ["building"],
        "additionalProperties": False,
    }


@dataclass
class ScenarioFile:
    """Validated scenario file contents, resolved into domain objects."""

    path: Path | None
    building: Building
    scenarios: list[str]
    params: SharedParams
    dispatch_days: list[int] = field(default_factory=list)
    output: Path = Path("results")
    raw: dict = field(default_factory=dict)


def _merge(base, overrides: Mapping[str, Any], cls):
    d = to_dict(base)
    for key, value in overrides.items():
        if key == "costs":
            for tech, changes in value.items():
                d["costs"][tech].update(changes)
        elif key == "co2_price_schedule":
            d[key].update({int(y): float(p) for y, p in value.items()})
        else:
            d[key] = value
    return from_dict(cls, d)


def parse_scenario_file(doc: Mapping[str, Any], base_dir: Path | None = None, path: Path | None = None) -> ScenarioFile:
    try:
        jsonschema.validate(doc, scenario_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path or 'scenario file'}: {where}: {exc.message}") from None
    base_dir = base_dir or Path.cwd()
    scenarios = list(doc.get("scenarios", ["REF"]))
    needs_cop = any("hp" in SCENARIO_TABLE[name][0] for name in scenarios)

    b = doc["building"]
    if "profiles" in b:
        profile_path = Path(b["profiles"])
        if not profile_path.is_absolute():
            profile_path = base_dir / profile_path
        profiles = load_profiles(profile_path, require_cop=needs_cop)
        building = building_from_profiles(b["name"], profiles, b.get("roof_area", 0.0),
                                          b.get("living_area", 0.0), b.get("occupants", 0))
    else:
        try:
            building = load_bundled_building(b["name"])
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        extra = {k: b[k] for k in ("roof_area", "living_area", "occupants") if k in b}
        if extra:
            building = dataclasses.replace(building, **extra)

    try:
        tech = _merge(TechnologyParams(), doc.get("technology", {}), TechnologyParams)
        econ = _merge(EconomicParams(), doc.get("economics", {}), EconomicParams)
        emis = _merge(EmissionParams(), doc.get("emissions", {}), EmissionParams)
        pol_doc = dict(doc.get("policy", {}))
        policy = PolicyRuleSet.by_vintage(pol_doc.pop("vintage", "TEL2021"))
        no_subsidy = pol_doc.pop("without_subsidies", False)
        policy = _merge(policy, pol_doc, PolicyRuleSet)
        if no_subsidy:
            policy = policy.without_subsidies()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'scenario file'}: {exc}") from None

    ts = doc.get("time_slice", {"kind": "full_year"})
    if ts["kind"] == "full_year":
        time_slice = TimeSlice.full_year()
    elif ts["kind"] == "representative_weeks":
        time_slice = TimeSlice.representative_weeks(ts.get("count", 4))
    else:
        time_slice = TimeSlice.first_hours(ts.get("count", 168), HOURS_PER_YEAR / ts.get("count", 168))
    params = SharedParams(
        tech=tech,
        econ=econ,
        policy=policy,
        emis=emis,
        time_slice=time_slice,
        solve_options=SolveOptions(**doc.get("solver", {})),
        chp_capacities=tuple(float(c) for c in doc.get("chp_capacities", (0, 10, 20, 30, 40, 50))),
        workers=doc.get("workers", 1),
    )
    output = Path(doc.get("output", "results"))
    if not output.is_absolute():
        output = base_dir / output
    return ScenarioFile(path, building, scenarios, params,
                        list(doc.get("dispatch_days", [])), output, dict(doc))


def load_scenario_file(path: str | Path) -> ScenarioFile:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_scenario_file(doc, path.parent, path)


# ---------------------------------------------------------------------------
# reports

WATERFALL_COLUMNS = ("scenario", "chp_sweep_kWel", "category", "value_EUR")
DISPATCH_COLUMNS = (
    "scenario", "hour", "el_demand_kW", "heat_demand_kW", "pv_kW", "chp_el_kW", "grid_te_kW", "grid_hp_kW",
    "feed_in_kW", "bat_dis_kW", "hp_el_kW", "q_hp_kW", "q_boiler_kW", "q_chp_kW", "hs_level_kWh",
    "bat_level_kWh", "ev_kW",
)
EXTRA_RESULT_COLUMNS = ("chp_sweep_kWel", "best_flag")


@dataclass
class ReportBundle:
    rows: list[dict] = field(default_factory=list)
    waterfall: list[dict] = field(default_factory=list)
    dispatch_days: dict[int, list[dict]] = field(default_factory=dict)
    columns: tuple[str, ...] = RESULT_COLUMNS + EXTRA_RESULT_COLUMNS


def report_row(report: KpiReport, cap: float, best: bool) -> dict:
    rec = report.to_record()
    rec["chp_sweep_kWel"] = cap
    rec["best_flag"] = int(best)
    return rec


def waterfall_rows(report: KpiReport, cap: float) -> list[dict]:
    return [{"scenario": report.name, "chp_sweep_kWel": cap, "category": k, "value_EUR": v}
            for k, v in report.cash_flows.items()]


def _dispatch_rows(name: str, schedule, days: Sequence[int], chp_heat_per_el: float) -> dict[int, list[dict]]:
    """Hourly rows for each requested day of the year that lies inside the modelled hours."""
    out: dict[int, list[dict]] = {}
    f = schedule.flows
    for d in days:
        sel = np.flatnonzero((schedule.hours >= 24 * d) & (schedule.hours < 24 * (d + 1)))
        if sel.size:
            out[d] = [{
                "scenario": name,
                "hour": int(schedule.hours[t]),
                "el_demand_kW": schedule.el_demand[t],
                "heat_demand_kW": schedule.heat_demand[t],
                "pv_kW": schedule.pv_generation[t],
                "chp_el_kW": f["chp_el"][t],
                "grid_te_kW": f["grid_te"][t],
                "grid_hp_kW": f["grid_hp"][t],
                "feed_in_kW": schedule.feed_in[t],
                "bat_dis_kW": f["bat_dis"][t],
                "hp_el_kW": schedule.hp_load[t],
                "q_hp_kW": f["q_hp"][t],
                "q_boiler_kW": f["q_boiler"][t],
                "q_chp_kW": f["chp_el"][t] * chp_heat_per_el,
                "hs_level_kWh": f["hs_lvl"][t],
                "bat_level_kWh": f["bat_lvl"][t],
                "ev_kW": schedule.ev_load[t],
            } for t in sel]
    return out


def build_bundle(results: Sequence[ScenarioResult], days: Sequence[int] = (), all_capacities: bool = False) -> ReportBundle:
    """Rows, waterfall and dispatch extracts of ``results``; with ``all_capacities`` every sweep member is a row."""
    bundle = ReportBundle()
    for res in results:
        best = res.sweep.best
        if all_capacities:
            members = list(res.capacity_reports().items())
        else:
            members = [(best, res.report)]
        for cap, rep in members:
            if rep is None:
                continue
            bundle.rows.append(report_row(rep, cap, cap == best))
            bundle.waterfall.extend(waterfall_rows(rep, cap))
        rec = res.record
        if rec is not None and rec.schedule is not None and days:
            heat_per_el = 1.0 / rec.scenario.tech.chp_power_to_heat
            for d, rows in _dispatch_rows(res.name, rec.schedule, days, heat_per_el).items():
                bundle.dispatch_days.setdefault(d, []).extend(rows)
    return bundle


def _fixed(value: float, decimals: int) -> str:
    text = f"{value:.{decimals}f}"
    # avoid "-0.000000"
    return text[1:] if text.startswith("-") and float(text) == 0 else text


def format_cell(value: Any) -> str:
    """Locale-independent cell text: fixed decimals, empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return ""
        return _fixed(float(value), REPORT_DECIMALS)
    return str(value)


def json_value(value: Any) -> Any:
    """The number JSON carries for a cell: the same rounding as the CSV text."""
    if value is None:
        return None
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(_fixed(float(value), REPORT_DECIMALS)) if math.isfinite(value) else None
    return value


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[Mapping]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(row.get(c)) for c in columns])


def emit_report(bundle: ReportBundle, directory: str | Path) -> list[Path]:
    """Write results.csv/json, waterfall.csv and dispatch_day_<d>.csv; returns the written paths."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        path = out / "results.csv"
        _write_csv(path, bundle.columns, bundle.rows)
        written.append(path)
        path = out / "results.json"
        doc = [{c: json_value(row.get(c)) for c in bundle.columns} for row in bundle.rows]
        path.write_text(json.dumps(doc, indent=2) + "\n")
        written.append(path)
        path = out / "waterfall.csv"
        _write_csv(path, WATERFALL_COLUMNS, bundle.waterfall)
        written.append(path)
        for d in sorted(bundle.dispatch_days):
            path = out / f"dispatch_day_{d}.csv"
            _write_csv(path, DISPATCH_COLUMNS, bundle.dispatch_days[d])
            written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc.strerror or exc}") from exc
    return written


def read_results_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
