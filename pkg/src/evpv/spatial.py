"""Daily charging energy per zone and charging-location category."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputDataError
from .mobility import MobilityResult
from .zoning import ZoneGrid

LOCATIONS = ("home", "work", "poi")


@dataclass(frozen=True)
class VehicleClass:
    name: str
    share: float
    battery_kwh: float
    consumption_kwh_per_km: float
    max_power_kw: float = math.inf


@dataclass(frozen=True)
class FleetSpec:
    classes: tuple

    def __post_init__(self):
        if not self.classes:
            raise ConfigError("fleet needs at least one vehicle class")
        if abs(sum(c.share for c in self.classes) - 1.0) > 1e-9:
            raise ConfigError("fleet class shares must sum to 1")
        for c in self.classes:
            if c.share < 0 or c.battery_kwh <= 0 or c.consumption_kwh_per_km <= 0 or c.max_power_kw <= 0:
                raise ConfigError(f"invalid parameters for vehicle class {c.name!r}")

    @property
    def mean_consumption(self) -> float:
        return sum(c.share * c.consumption_kwh_per_km for c in self.classes)


def default_fleet() -> FleetSpec:
    return FleetSpec((
        VehicleClass("BEV", 0.8, 60.0, 0.183),
        VehicleClass("PHEV", 0.2, 15.0, 0.183, 11.0),
    ))


@dataclass(frozen=True)
class ChargingShares:
    home: float
    work: float
    poi: float

    def __post_init__(self):
        vals = (self.home, self.work, self.poi)
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ConfigError("charging shares must lie in [0, 1]")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ConfigError(f"charging shares must sum to 1 (got {sum(vals):.6g})")

    def as_array(self):
        return np.array([self.home, self.work, self.poi])


SCENARIOS = {
    "home": ChargingShares(1.0, 0.0, 0.0),
    "work": ChargingShares(0.0, 1.0, 0.0),
    "mixed": ChargingShares(0.25, 0.25, 0.5),
}


@dataclass
class SpatialDemand:
    home: np.ndarray  # kWh/day per zone
    work: np.ndarray
    poi: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.home + self.work + self.poi

    def totals(self) -> dict:
        t = {k: float(getattr(self, k).sum()) for k in LOCATIONS}
        t["total"] = sum(t.values())
        return t


def spatial_demand(mob: MobilityResult, grid: ZoneGrid, shares: ChargingShares, fleet: FleetSpec,
                   eta_charge: float = 0.9) -> SpatialDemand:
    if not 0 < eta_charge <= 1:
        raise ConfigError("charging efficiency must lie in (0, 1]")
    k = fleet.mean_consumption / eta_charge
    home = shares.home * k * mob.vkm_out
    work = shares.work * k * mob.vkm_in
    m = np.asarray(grid.pois, dtype=float)
    if shares.poi > 0:
        if grid.m_tot == 0:
            raise InputDataError("no POIs to host demand")
        poi = shares.poi * k * mob.vkm_out.sum() * m / m.sum()
    else:
        poi = np.zeros_like(home)
    return SpatialDemand(home=home, work=work, poi=poi)


def _r(x):
    return round(float(x), 1)


def demand_geojson(d: SpatialDemand, grid: ZoneGrid) -> dict:
    feats = []
    for z in grid.zones:
        i = z.id
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [list(map(list, z.polygon))]},
            "properties": {
                "id": i,
                "E_home_kwh": _r(d.home[i]),
                "E_work_kwh": _r(d.work[i]),
                "E_poi_kwh": _r(d.poi[i]),
                "E_total_kwh": _r(d.total[i]),
            },
        })
    return {"type": "FeatureCollection", "features": feats}


def export_demand_map(d: SpatialDemand, grid: ZoneGrid, path) -> None:
    with open(path, "w") as fh:
        json.dump(demand_geojson(d, grid), fh, indent=1, sort_keys=False)


def export_demand_csv(d: SpatialDemand, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "E_home_kwh", "E_work_kwh", "E_poi_kwh"])
        for i in range(d.home.size):
            w.writerow([i, _r(d.home[i]), _r(d.work[i]), _r(d.poi[i])])
