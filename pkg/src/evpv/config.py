"""Scenario configuration: YAML file with a fixed key set and case-study defaults.

Every key is optional; an empty file gives the Addis Ababa case study on
the bundled sample inputs. Unknown keys and ill-typed values are rejected
with their dotted key path and line number.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .mobility import CircuityModel
from .pv.model import PVSystemSpec
from .routing import RoutingConfig
from .spatial import SCENARIOS, ChargingShares, FleetSpec, VehicleClass
from .temporal import ArrivalModel, ChargerMix, Scenario

SCENARIO_NAMES = ("home", "work", "mixed", "custom")
_NUM = (int, float)

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "inputs": {
        "boundary": None,  # None = bundled sample file
        "population": None,
        "workplaces": None,
        "pois": None,
        "weather": None,
        "national_load": None,
    },
    "site": {"lat": 9.01, "lon": 38.757, "tz_offset_h": 3.0, "year": 2020},
    "zoning": {"cell_size_km": 1.95},
    "fleet": {
        "n_tot": 100_000,
        "classes": [
            {"name": "BEV", "share": 0.8, "battery_kwh": 60.0, "consumption_kwh_per_km": 0.183,
             "max_power_kw": None},
            {"name": "PHEV", "share": 0.2, "battery_kwh": 15.0, "consumption_kwh_per_km": 0.183,
             "max_power_kw": 11.0},
        ],
    },
    "mobility": {
        "router": "none",  # none | http
        "circuity": 1.3,  # used when no router is configured
        "circuity_samples": 100,
        "extra_km": 0.0,
        "routing": {"base_url": "https://api.openrouteservice.org", "profile": "driving-car",
                    "api_key_env": "ORS_API_KEY", "timeout": 30.0, "max_locations": 50, "max_concurrency": 4},
    },
    "charging": {
        "scenarios": ["home", "work", "mixed"],
        "shares": None,  # {home, work, poi} for the custom scenario
        "arrivals": {"home_mean": 18.0, "home_sd": 2.7, "work_mean": 9.0, "work_sd": 1.8},
        "chargers": {
            "home": [[3.2, 0.45], [7.4, 0.40], [11.0, 0.15]],
            "work": [[7.4, 0.25], [11.0, 0.50], [22.0, 0.25]],
            "poi": [[7.4, 0.15], [11.0, 0.15], [22.0, 0.55], [50.0, 0.15]],
        },
        "efficiency": 0.9,
        "runs": 5,
        "point_runs": 10,
        "dt_minutes": 15,
        "round_to": 500,
        "power_sweep_kw": [3.7, 7.4, 11.0, 15.0, 22.0, 30.0, 50.0],
    },
    "pv": {
        "tilt": None,  # None = optimise tilt and azimuth
        "azimuth": None,
        "efficiency": 0.22,
        "temp_coeff": -0.004,
        "losses": 0.14,
        "a_r": 0.16,
        "albedo": 0.2,
        "u_c": 29.0,
        "u_v": 0.0,
        "absorption": 0.9,
        "diffuse_iam": True,
        "source": "file",  # file | pvgis
    },
    "analysis": {
        "capacities": [0.5, 1.0, 1.5, 2.0],
        "holidays": [],
        "radar_capacity": 1.5,
    },
    "grid": {
        "study_population": 5.54e6,
        "region_population": 8.88e6,
        "region_peak_mw": 2100.0,
        "renewal_rate": 0.05,
        "initial_share": 0.0,
        "sales_shares": [1.0, 0.5, 0.2],
        "target_share": 1 / 6,
    },
}

_BUNDLED = {
    "boundary": "boundary.geojson",
    "population": "population.asc",
    "workplaces": "workplaces.csv",
    "pois": "pois.csv",
    "weather": "weather_2020.csv",
    "national_load": "national_load.csv",
}

# Keys whose value is replaced wholesale rather than merged key by key.
_OPAQUE = {("fleet", "classes"), ("charging", "chargers"), ("charging", "shares"), ("charging", "scenarios"),
           ("charging", "power_sweep_kw"), ("analysis", "capacities"), ("analysis", "holidays"),
           ("grid", "sales_shares")}
# Keys accepting null in addition to a number.
_NULLABLE = {("pv", "tilt"), ("pv", "azimuth")} | {("inputs", k) for k in _BUNDLED}


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("evpv") / "data" / _BUNDLED[name]))


def _line_map(text: str) -> dict:
    """Dotted key path tuple -> 1-based line number."""
    lines = {}
    root = yaml.compose(text, Loader=yaml.SafeLoader)

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                lines[path + (i,)] = v.start_mark.line + 1
                walk(v, path + (i,))

    if root is not None:
        walk(root, ())
    return lines


class _Checker:
    def __init__(self, lines, source):
        self.lines = lines
        self.source = source

    def fail(self, path, msg):
        where = ".".join(str(p) for p in path) or "<root>"
        line = self.lines.get(tuple(path))
        loc = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{loc}: {where}: {msg}")

    def merge(self, default, user, path=()):
        if not isinstance(user, dict):
            self.fail(path, f"expected a mapping, got {type(user).__name__}")
        out = copy.deepcopy(default)
        for k, v in user.items():
            p = path + (k,)
            if k not in default:
                self.fail(p, "unknown key")
            d = default[k]
            if p in _OPAQUE:
                out[k] = v
            elif isinstance(d, dict):
                out[k] = self.merge(d, v, p)
            else:
                out[k] = self.scalar(d, v, p)
        return out

    def scalar(self, default, v, path):
        if v is None:
            if path in _NULLABLE:
                return None
            self.fail(path, "value required")
        if path[:1] == ("inputs",):
            if not isinstance(v, str):
                self.fail(path, "expected a file path")
            return v
        if isinstance(default, bool):
            if not isinstance(v, bool):
                self.fail(path, "expected true/false")
            return v
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(path, "expected an integer")
            return v
        if isinstance(default, float) or default is None:
            if isinstance(v, bool) or not isinstance(v, _NUM) or not math.isfinite(v):
                self.fail(path, "expected a number")
            return float(v)
        if isinstance(default, str):
            if not isinstance(v, str):
                self.fail(path, "expected a string")
            return v
        return v


@dataclass
class ScenarioConfig:
    data: dict
    base_dir: Path
    source: str = "<defaults>"

    # -- accessors -------------------------------------------------------------
    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def input_path(self, name: str) -> Path:
        v = self.data["inputs"][name]
        if v is None:
            return bundled_path(name)
        p = Path(v).expanduser()
        return p if p.is_absolute() else self.base_dir / p

    def fleet_spec(self) -> FleetSpec:
        return FleetSpec(tuple(
            VehicleClass(c["name"], c["share"], c["battery_kwh"], c["consumption_kwh_per_km"],
                         math.inf if c.get("max_power_kw") is None else c["max_power_kw"])
            for c in self.data["fleet"]["classes"]))

    def shares(self, name: str) -> ChargingShares:
        if name == "custom":
            s = self.data["charging"]["shares"]
            return ChargingShares(s["home"], s["work"], s["poi"])
        return SCENARIOS[name]

    def scenario(self, name: str) -> Scenario:
        ch = self.data["charging"]
        mix = ChargerMix(**{k: tuple((float(p), float(q)) for p, q in v) for k, v in ch["chargers"].items()})
        return Scenario(shares=self.shares(name), arrivals=ArrivalModel(**ch["arrivals"]), chargers=mix,
                        eta=ch["efficiency"])

    @property
    def scenario_names(self) -> list:
        return list(self.data["charging"]["scenarios"])

    @property
    def dt_h(self) -> float:
        return self.data["charging"]["dt_minutes"] / 60.0

    def circuity(self) -> CircuityModel:
        return CircuityModel(self.data["mobility"]["circuity"])

    def routing_config(self) -> RoutingConfig:
        r = self.data["mobility"]["routing"]
        return RoutingConfig(base_url=r["base_url"], api_key_env=r["api_key_env"], profile=r["profile"],
                             timeout=r["timeout"], max_locations=r["max_locations"],
                             max_concurrency=min(r["max_concurrency"], self.data["threads"]))

    def pv_spec(self, tilt=None, azimuth=None) -> PVSystemSpec:
        p = {k: v for k, v in self.data["pv"].items() if k != "source"}
        if tilt is not None:
            p["tilt"] = tilt
        if azimuth is not None:
            p["azimuth"] = azimuth
        if p["tilt"] is None:
            p["tilt"] = 0.0
        return PVSystemSpec(**p)

    def section_hash(self, *keys) -> str:
        return hashlib.sha256(json.dumps([self.data.get(k) for k in keys], sort_keys=True).encode()).hexdigest()

    @property
    def hash(self) -> str:
        """Hash of every result-affecting setting (the thread cap is excluded)."""
        d = {k: v for k, v in self.data.items() if k != "threads"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with CLI-level overrides: seed, runs, threads, scenario."""
        d = copy.deepcopy(self.data)
        if kw.get("seed") is not None:
            d["seed"] = int(kw["seed"])
        if kw.get("runs") is not None:
            d["charging"]["runs"] = int(kw["runs"])
        if kw.get("threads") is not None:
            d["threads"] = int(kw["threads"])
        if kw.get("scenario") is not None:
            d["charging"]["scenarios"] = [kw["scenario"]]
        cfg = ScenarioConfig(d, self.base_dir, self.source)
        validate(cfg, _Checker({}, self.source))
        return cfg


def validate(cfg: ScenarioConfig, chk: _Checker) -> None:
    d = cfg.data
    if d["seed"] < 0:
        chk.fail(("seed",), "must be non-negative")
    if d["threads"] < 1:
        chk.fail(("threads",), "must be >= 1")
    if d["zoning"]["cell_size_km"] <= 0:
        chk.fail(("zoning", "cell_size_km"), "must be positive")
    if d["fleet"]["n_tot"] < 0:
        chk.fail(("fleet", "n_tot"), "must be non-negative")

    classes = d["fleet"]["classes"]
    if not isinstance(classes, list) or not classes:
        chk.fail(("fleet", "classes"), "expected a non-empty list of vehicle classes")
    keys = {"name", "share", "battery_kwh", "consumption_kwh_per_km", "max_power_kw"}
    for i, c in enumerate(classes):
        if not isinstance(c, dict):
            chk.fail(("fleet", "classes", i), "expected a mapping")
        for k in c:
            if k not in keys:
                chk.fail(("fleet", "classes", i, k), "unknown key")
        for k in keys - {"max_power_kw"}:
            if k not in c:
                chk.fail(("fleet", "classes", i), f"missing key {k!r}")
    try:
        cfg.fleet_spec()
    except (ConfigError, TypeError) as exc:
        chk.fail(("fleet", "classes"), str(exc))

    m = d["mobility"]
    if m["router"] not in ("none", "http"):
        chk.fail(("mobility", "router"), "must be 'none' or 'http'")
    if m["circuity"] < 1:
        chk.fail(("mobility", "circuity"), "must be >= 1")
    if m["extra_km"] < 0:
        chk.fail(("mobility", "extra_km"), "must be non-negative")

    ch = d["charging"]
    names = ch["scenarios"]
    if not isinstance(names, list) or not names or any(n not in SCENARIO_NAMES for n in names):
        chk.fail(("charging", "scenarios"), f"expected a non-empty list drawn from {SCENARIO_NAMES}")
    if len(set(names)) != len(names):
        chk.fail(("charging", "scenarios"), "duplicate scenario")
    s = ch["shares"]
    if s is not None:
        if not isinstance(s, dict) or set(s) != {"home", "work", "poi"}:
            chk.fail(("charging", "shares"), "expected a mapping with keys home, work, poi")
        if any(isinstance(v, bool) or not isinstance(v, _NUM) for v in s.values()):
            chk.fail(("charging", "shares"), "shares must be numbers")
        try:
            ChargingShares(s["home"], s["work"], s["poi"])
        except ConfigError as exc:
            chk.fail(("charging", "shares"), str(exc))
    if "custom" in names and s is None:
        chk.fail(("charging", "shares"), "the custom scenario needs charging.shares")
    if not isinstance(ch["chargers"], dict) or set(ch["chargers"]) - {"home", "work", "poi"}:
        chk.fail(("charging", "chargers"), "expected a mapping with keys among home, work, poi")
    for loc, opts in ch["chargers"].items():
        ok = isinstance(opts, list) and all(
            isinstance(o, list) and len(o) == 2 and all(isinstance(x, _NUM) and not isinstance(x, bool) for x in o)
            for o in opts)
        if not ok:
            chk.fail(("charging", "chargers", loc), "expected a list of [power_kw, probability] pairs")
    for k in ("runs", "point_runs", "dt_minutes", "round_to"):
        if ch[k] < 1:
            chk.fail(("charging", k), "must be >= 1")
    if 1440 % ch["dt_minutes"]:
        chk.fail(("charging", "dt_minutes"), "must divide 1440")
    if not isinstance(ch["power_sweep_kw"], list) or any(
            isinstance(x, bool) or not isinstance(x, _NUM) or x <= 0 for x in ch["power_sweep_kw"]):
        chk.fail(("charging", "power_sweep_kw"), "expected a list of positive powers")
    try:
        for n in names:
            cfg.scenario(n)
    except ConfigError as exc:
        chk.fail(("charging",), str(exc))

    pv = d["pv"]
    if pv["source"] not in ("file", "pvgis"):
        chk.fail(("pv", "source"), "must be 'file' or 'pvgis'")
    try:
        cfg.pv_spec()
    except ConfigError as exc:
        chk.fail(("pv",), str(exc))

    an = d["analysis"]
    if not isinstance(an["capacities"], list) or any(
            isinstance(x, bool) or not isinstance(x, _NUM) or x < 0 for x in an["capacities"]):
        chk.fail(("analysis", "capacities"), "expected a list of non-negative kWp/EV values")
    if not isinstance(an["holidays"], list):
        chk.fail(("analysis", "holidays"), "expected a list of ISO dates")
    for i, h in enumerate(an["holidays"]):
        try:
            an["holidays"][i] = str(np.datetime64(str(h), "D"))  # YAML may hand back date objects
        except ValueError:
            chk.fail(("analysis", "holidays", i), f"not a date: {h!r}")

    g = d["grid"]
    if g["study_population"] <= 0 or g["region_population"] <= 0:
        chk.fail(("grid",), "populations must be positive")
    if g["renewal_rate"] <= 0:
        chk.fail(("grid", "renewal_rate"), "must be positive")
    if not 0 <= g["initial_share"] <= 1 or not 0 < g["target_share"] <= 1:
        chk.fail(("grid",), "shares must lie in [0, 1]")

    for name in _BUNDLED:
        if name == "weather" and pv["source"] == "pvgis":
            continue
        p = cfg.input_path(name)
        if not p.is_file():
            chk.fail(("inputs", name), f"file not found: {p}")


def load_config(path=None, text: str | None = None) -> ScenarioConfig:
    """Parse, default and validate a configuration file (or ``text``)."""
    source = "<string>" if text is not None else str(path) if path else "<defaults>"
    base = Path(path).resolve().parent if path else Path.cwd()
    if text is None and path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    text = text or ""
    try:
        user = yaml.safe_load(text)
        lines = _line_map(text)
    except (yaml.YAMLError, ValueError) as exc:  # PyYAML raises ValueError on impossible dates
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    chk = _Checker(lines, source)
    data = chk.merge(DEFAULTS, user or {})
    cfg = ScenarioConfig(data, base, source)
    validate(cfg, chk)
    return cfg
