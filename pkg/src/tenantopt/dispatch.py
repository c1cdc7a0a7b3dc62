"""Solved design and hourly dispatch, detached from the MILP so they can be saved and post-processed."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .builder import CAPACITY_UNITS, BuiltModel
from .solver import Solution

# hourly flows kept in a dispatch extract, in file order
FLOW_KEYS = (
    "pv_te", "pv_grid", "pv_hp", "pv_bat",
    "chp_el", "chp_grid", "chp_te", "chp_self", "chp_grid_wo", "chp_te_wo", "chp_self_wo",
    "chp_hp", "chp_bat", "chp_levy", "chp_on",
    "grid_te", "grid_hp", "grid_ll",
    "q_hp", "q_boiler", "hs_ch", "hs_dis", "hs_lvl", "bat_dis", "bat_lvl", "ev_charge",
)
PROFILE_KEYS = ("el_demand", "ev_demand", "heat_demand", "cop", "pv_yield")

DESIGN_FILE = "design.json"
DISPATCH_FILE = "dispatch.csv"


@dataclass
class SystemDesign:
    """Installed capacities and the discrete choices of a solution."""

    capacities: dict[str, float]
    built: dict[str, bool]
    pv_scheme: int | None = None  # 1-based scheme index, None without PV
    pv_feed_in: float = 0.0
    pv_scp: float = 0.0
    pv_levy: float = 0.0
    chp_levy_liable: bool = False
    chp_unit_count: int = 1

    def to_dict(self) -> dict:
        return {
            "capacities": dict(self.capacities),
            "built": dict(self.built),
            "pv_scheme": self.pv_scheme,
            "pv_feed_in": self.pv_feed_in,
            "pv_scp": self.pv_scp,
            "pv_levy": self.pv_levy,
            "chp_levy_liable": self.chp_levy_liable,
            "chp_unit_count": self.chp_unit_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemDesign":
        return cls(
            capacities={k: float(v) for k, v in data["capacities"].items()},
            built={k: bool(v) for k, v in data["built"].items()},
            pv_scheme=data.get("pv_scheme"),
            pv_feed_in=float(data.get("pv_feed_in", 0.0)),
            pv_scp=float(data.get("pv_scp", 0.0)),
            pv_levy=float(data.get("pv_levy", 0.0)),
            chp_levy_liable=bool(data.get("chp_levy_liable", False)),
            chp_unit_count=int(data.get("chp_unit_count", 1)),
        )


@dataclass
class DispatchSchedule:
    """Hourly flows (kW, one value per modelled hour) with the profiles they were solved against."""

    hours: np.ndarray
    weights: np.ndarray
    flows: dict[str, np.ndarray]
    el_demand: np.ndarray
    ev_demand: np.ndarray
    heat_demand: np.ndarray
    cop: np.ndarray
    pv_yield: np.ndarray
    tenant_electricity: bool = True
    ev_mode: str = "none"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hours = np.asarray(self.hours, dtype=int)
        self.weights = np.asarray(self.weights, dtype=float)
        T = len(self.hours)
        for key in FLOW_KEYS:
            self.flows[key] = np.asarray(self.flows.get(key, np.zeros(T)), dtype=float)
        for key in PROFILE_KEYS:
            setattr(self, key, np.asarray(getattr(self, key), dtype=float))
        for key, arr in [*self.flows.items(), *((k, getattr(self, k)) for k in PROFILE_KEYS)]:
            if arr.shape != (T,):
                raise ValueError(f"{key} has shape {arr.shape}, expected ({T},)")

    def __len__(self) -> int:
        return len(self.hours)

    def __getitem__(self, key: str) -> np.ndarray:
        return self.flows[key]

    def annual(self, key: str) -> float:
        """Weighted annual sum of a flow or profile."""
        arr = self.flows[key] if key in self.flows else getattr(self, key)
        return float(np.sum(self.weights * arr))

    @property
    def ev_load(self) -> np.ndarray:
        """Hourly EV charging that the electricity balance actually served."""
        if self.ev_mode == "optimized":
            return self.flows["ev_charge"]
        if self.ev_mode == "fixed":
            return self.ev_demand
        return np.zeros(len(self))

    @property
    def hp_load(self) -> np.ndarray:
        return self.flows["pv_hp"] + self.flows["chp_hp"] + self.flows["grid_hp"]

    @property
    def pv_generation(self) -> np.ndarray:
        f = self.flows
        return f["pv_te"] + f["pv_grid"] + f["pv_hp"] + f["pv_bat"]

    @property
    def feed_in(self) -> np.ndarray:
        f = self.flows
        return f["pv_grid"] + f["chp_grid"] + f["chp_grid_wo"]

    @property
    def total_demand(self) -> np.ndarray:
        return self.el_demand + self.ev_load + self.hp_load


def _snap(value: float, tol: float = 1e-9) -> float:
    return 0.0 if abs(value) < tol else value


def extract(bm: BuiltModel, solution: Solution) -> tuple[SystemDesign, DispatchSchedule]:
    """Read the design and the hourly flows of ``solution`` out of the built model."""
    if not solution.has_values:
        raise ValueError(f"solution has no values (status {solution.status})")
    x = solution.x
    v = bm.v
    # solver noise around zero is reported as an exact zero
    caps = {k: _snap(float(x[v[f"cap_{k}"]])) for k in CAPACITY_UNITS}
    built = {k: bool(round(float(x[v[f"bin_fix_{k}"]]))) for k in CAPACITY_UNITS}
    design = SystemDesign(
        capacities=caps,
        built=built,
        chp_levy_liable=bool(round(float(x[v["bin_chp_levy"]]))),
        chp_unit_count=bm.config.cascade_unit_count if bm.config.chp_mode == "cascading" else 1,
    )
    if caps["pv"] > 0:
        k = int(np.argmax(x[v["bin_pv"]]))
        scheme = bm.schemes[k]
        design.pv_scheme = scheme.index
        design.pv_feed_in = scheme.feed_in
        design.pv_scp = scheme.scp
        design.pv_levy = scheme.self_consumption_levy
    flows = {}
    for key in FLOW_KEYS:
        if key == "ev_charge":
            flows[key] = x[v[key]].sum(axis=0) if key in v else np.zeros(bm.hours)
        else:
            flows[key] = x[v[key]].astype(float)
    schedule = DispatchSchedule(
        hours=bm.config.time_slice.index(),
        weights=bm.weights,
        flows=flows,
        el_demand=bm.el_demand,
        ev_demand=bm.ev_demand,
        heat_demand=bm.heat_demand,
        cop=bm.cop,
        pv_yield=bm.pv_yield,
        tenant_electricity=bm.config.is_tenant_electricity,
        ev_mode=bm.config.ev_mode,
        meta={"name": bm.config.name, "status": solution.status, "npv": solution.objective_value,
              "gap": solution.gap},
    )
    return design, schedule


def save(design: SystemDesign, schedule: DispatchSchedule, directory: str | Path) -> None:
    """Write design.json and dispatch.csv; floats use repr so a reload is exact."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "design": design.to_dict(),
        "tenant_electricity": schedule.tenant_electricity,
        "ev_mode": schedule.ev_mode,
        "meta": schedule.meta,
    }
    (out / DESIGN_FILE).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    cols = ["hour", "weight", *FLOW_KEYS, *PROFILE_KEYS]
    with open(out / DISPATCH_FILE, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        data = [schedule.weights, *(schedule.flows[k] for k in FLOW_KEYS),
                *(getattr(schedule, k) for k in PROFILE_KEYS)]
        for t, hour in enumerate(schedule.hours):
            writer.writerow([int(hour), *(repr(float(col[t])) for col in data)])


def load(directory: str | Path) -> tuple[SystemDesign, DispatchSchedule]:
    src = Path(directory)
    doc = json.loads((src / DESIGN_FILE).read_text())
    path = src / DISPATCH_FILE
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    missing = {"hour", "weight", *FLOW_KEYS, *PROFILE_KEYS} - set(header)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    try:
        table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from exc
    col = {name: table[:, j] for j, name in enumerate(header)}
    schedule = DispatchSchedule(
        hours=col["hour"].astype(int),
        weights=col["weight"],
        flows={k: col[k] for k in FLOW_KEYS},
        el_demand=col["el_demand"],
        ev_demand=col["ev_demand"],
        heat_demand=col["heat_demand"],
        cop=col["cop"],
        pv_yield=col["pv_yield"],
        tenant_electricity=bool(doc["tenant_electricity"]),
        ev_mode=doc["ev_mode"],
        meta=doc.get("meta", {}),
    )
    return SystemDesign.from_dict(doc["design"]), schedule
