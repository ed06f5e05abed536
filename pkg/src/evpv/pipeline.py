"""Stage orchestration with content-hash caching and a run manifest.

Stages run in the fixed order zones -> mobility -> demand -> profiles -> pv
-> indicators -> report. Each stage's result is cached under a key built
from the config sections it reads, the hashes of its input files and the
keys of the stages it depends on, so changing one setting recomputes only
the stages downstream of it. Output files are always rewritten from the
(cached or fresh) result, which keeps them byte-identical either way.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import os
import pickle
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as A
from . import mobility as M
from . import spatial as S
from . import temporal as T
from . import zoning as Z
from .config import ScenarioConfig
from .errors import InputDataError
from .pv import model as PV
from .pv import weather as W

log = logging.getLogger(__name__)

STAGES = ("zones", "mobility", "demand", "profiles", "pv", "indicators", "report")
DEPENDS = {
    "zones": (),
    "mobility": ("zones",),
    "demand": ("mobility",),
    "profiles": ("mobility",),
    "pv": (),
    "indicators": ("profiles", "pv"),
    "report": ("demand",),
}
# config sections and input files each stage reads (beyond its dependencies)
_READS = {
    "zones": (("zoning", "fleet"), ("boundary", "population", "workplaces", "pois")),
    "mobility": (("mobility", "seed"), ("boundary",)),
    "demand": (("fleet", "charging"), ()),
    "profiles": (("fleet", "charging", "seed"), ()),
    "pv": (("pv", "site"), ("weather",)),
    "indicators": (("analysis", "site", "charging", "seed"), ()),
    "report": (("grid",), ("national_load",)),
}


class MissingArtifactError(InputDataError):
    """A stage needs an upstream result that has not been computed yet."""


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _num(x, nd=6):
    return round(float(x), nd)


class Pipeline:
    def __init__(self, cfg: ScenarioConfig, out_dir):
        self.cfg = cfg
        self.root = Path(out_dir) / f"v{__version__}"
        self.cache = self.root / ".cache"
        self._inputs = {}
        self._keys = {}
        self._results = {}
        self.outputs = {}

    # -- hashing -----------------------------------------------------------------
    def input_hash(self, name) -> str | None:
        if name not in self._inputs:
            if name == "weather" and self.cfg["pv"]["source"] == "pvgis":
                self._inputs[name] = None
            else:
                p = self.cfg.input_path(name)
                if not p.is_file():
                    raise InputDataError(f"input file not found: {p}")
                self._inputs[name] = file_hash(p)
        return self._inputs[name]

    def key(self, stage) -> str:
        if stage not in self._keys:
            sections, files = _READS[stage]
            doc = {
                "stage": stage, "version": __version__,
                "config": {s: self.cfg.data[s] for s in sections},
                "inputs": {f: self.input_hash(f) for f in files},
                "deps": {d: self.key(d) for d in DEPENDS[stage]},
            }
            self._keys[stage] = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
        return self._keys[stage]

    def _cache_path(self, stage):
        return self.cache / f"{stage}-{self.key(stage)[:20]}.pkl"

    def result(self, stage, compute=False):
        """Result of ``stage``: memory, then disk cache, then (if allowed) computed."""
        if stage in self._results:
            return self._results[stage]
        path = self._cache_path(stage)
        if path.exists():
            with open(path, "rb") as fh:
                res = pickle.load(fh)
            log.info("%s: reusing cached result", stage)
        elif compute:
            res = getattr(self, f"_run_{stage}")()
            self.cache.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                pickle.dump(res, fh, protocol=4)
            os.replace(tmp, path)
        else:
            raise MissingArtifactError(
                f"stage '{stage}' has no result for the current configuration; run `evpv {stage}` "
                f"(or `evpv run`) first")
        self._results[stage] = res
        return res

    # -- driver ------------------------------------------------------------------
    def run(self, stages=STAGES) -> dict:
        """Run ``stages`` (in pipeline order) and write their outputs and the manifest."""
        wanted = [s for s in STAGES if s in set(stages)]
        unknown = set(stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}")
        started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
        self.root.mkdir(parents=True, exist_ok=True)
        for s in wanted:
            for d in DEPENDS[s]:
                self.result(d, compute=d in wanted)
            log.info("stage %s", s)
            res = self.result(s, compute=True)
            getattr(self, f"_write_{s}")(res)
        return self._write_manifest(wanted, started)

    def _out(self, name) -> Path:
        return self.root / name

    def _record(self, stage, *paths):
        for p in paths:
            self.outputs.setdefault(stage, []).append(Path(p).name)

    def _write_manifest(self, stages, started) -> dict:
        path = self.root / "manifest.json"
        old = json.loads(path.read_text()) if path.exists() else {}
        same_cfg = old.get("config_hash") == self.cfg.hash
        stage_info = old.get("stages", {}) if same_cfg else {}
        for s in stages:
            stage_info[s] = {
                "key": self.key(s),
                "outputs": {n: file_hash(self.root / n) for n in sorted(self.outputs.get(s, []))},
            }
        inputs = {}
        for name in ("boundary", "population", "workplaces", "pois", "weather", "national_load"):
            h = self.input_hash(name)
            if h is not None:
                inputs[name] = {"path": str(self.cfg.input_path(name)), "sha256": h}
        man = {
            "version": __version__,
            "config_hash": self.cfg.hash,
            "seed": self.cfg.seed,
            "inputs": inputs,
            "stages": {s: stage_info[s] for s in STAGES if s in stage_info},
            "timestamps": {"started": started,
                           "finished": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")},
        }
        path.write_text(json.dumps(man, indent=1, sort_keys=True))
        (self.root / "config.json").write_text(json.dumps(self.cfg.data, indent=1, sort_keys=True))
        return man

    # -- stages ------------------------------------------------------------------
    def _grid(self):
        return self.result("zones")

    def _run_zones(self):
        cfg = self.cfg
        b = Z.read_boundary(cfg.input_path("boundary"))
        g = Z.build_zone_grid(b, cfg["zoning"]["cell_size_km"])
        g = Z.aggregate_population(g, Z.read_population(cfg.input_path("population")))
        g = Z.aggregate_points(g, Z.read_points(cfg.input_path("workplaces"), "workplace"))
        g = Z.aggregate_points(g, Z.read_points(cfg.input_path("pois"), "poi"))
        return Z.allocate_vehicles(g, cfg["fleet"]["n_tot"])

    def _write_zones(self, g):
        Z.write_zones_geojson(self._out("zones.geojson"), g)
        lon, lat = g.centroids_lonlat()
        with open(self._out("zones.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["zone", "lon", "lat", "population", "workplaces", "pois", "n_ev"])
            for i in range(g.n_zones):
                w.writerow([i, _num(lon[i]), _num(lat[i]), _num(g.population[i], 2), int(g.workplaces[i]),
                            int(g.pois[i]), int(g.n_ev[i])])
        self._record("zones", "zones.geojson", "zones.csv")

    def _run_mobility(self):
        cfg, g = self.cfg, self._grid()
        m = cfg["mobility"]
        router = None
        circ = cfg.circuity()
        if m["router"] == "http":
            from .routing import HTTPMatrixRouter

            router = HTTPMatrixRouter(cfg.routing_config())
            try:
                circ = M.estimate_circuity(Z.read_boundary(cfg.input_path("boundary")), router,
                                           m["circuity_samples"], cfg.seed)
            except Exception as exc:  # noqa: BLE001 - any routing failure falls back to the configured factor
                log.warning("circuity estimation failed (%s); using configured factor %.3f", exc, circ.factor)
        D = M.distance_matrix(g, router, circ)
        if router is not None:
            router.close()
        beta = M.compute_beta(g.cell_area_km2)
        Tm = M.trip_probabilities(g, D, beta)
        mob = M.vkm(g, Tm, D, m["extra_km"])
        return {"D": D, "T": Tm, "mob": mob, "circuity": circ}

    def _write_mobility(self, r):
        g, mob, D = self._grid(), r["mob"], r["D"]
        M.write_distance_csv(self._out("distance_matrix.csv"), D)
        with open(self._out("mobility_zones.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["zone", "vkm_out", "vkm_in", "n_ev"])
            for i in range(g.n_zones):
                w.writerow([i, _num(mob.vkm_out[i], 3), _num(mob.vkm_in[i], 3), int(g.n_ev[i])])
        with open(self._out("trip_probabilities.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["origin", "destination", "p"])
            for i, j in zip(*np.nonzero(r["T"].p > 1e-12)):
                w.writerow([int(i), int(j), f"{r['T'].p[i, j]:.9g}"])
        summary = {
            "beta_per_km": _num(r["T"].beta, 9), "circuity": _num(r["circuity"].factor),
            "circuity_samples": r["circuity"].n_samples, "mean_two_way_km": _num(mob.mean_daily_km),
            "vkm_total": _num(mob.vkm_out.sum(), 3),
            "routed_pairs": int(np.sum(D.source == M.ROUTED)), "zones": g.n_zones,
        }
        self._out("mobility_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
        self._record("mobility", "distance_matrix.csv", "mobility_zones.csv", "trip_probabilities.csv",
                     "mobility_summary.json")

    def _run_demand(self):
        cfg, g, mob = self.cfg, self._grid(), self.result("mobility")["mob"]
        spec = cfg.fleet_spec()
        eta = cfg["charging"]["efficiency"]
        return {n: S.spatial_demand(mob, g, cfg.shares(n), spec, eta) for n in cfg.scenario_names}

    def _write_demand(self, res):
        g = self._grid()
        totals = {}
        rows = []
        for name, d in res.items():
            S.export_demand_map(d, g, self._out(f"demand_{name}.geojson"))
            S.export_demand_csv(d, self._out(f"demand_{name}.csv"))
            self._record("demand", f"demand_{name}.geojson", f"demand_{name}.csv")
            totals[name] = {k: _num(v / 1000.0, 4) for k, v in d.totals().items()}
            n_ev = max(int(g.n_ev.sum()), 1)
            totals[name]["kwh_per_ev"] = _num(d.total.sum() / n_ev, 4)
            pop = np.asarray(g.population, float)
            rel = pop / pop.max() if pop.max() > 0 else pop
            rows += [[name, i, _num(rel[i]), _num(d.total[i], 1)] for i in range(g.n_zones)]
        with open(self._out("demand_vs_population.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "zone", "population_norm", "E_total_kwh"])
            w.writerows(rows)
        self._out("demand_summary.json").write_text(json.dumps({"mwh_per_day": totals}, indent=1, sort_keys=True))
        self._record("demand", "demand_vs_population.csv", "demand_summary.json")

    def _fleet(self):
        return self.result("profiles")["fleet"]

    def _run_profiles(self):
        cfg, g, mob = self.cfg, self._grid(), self.result("mobility")["mob"]
        ch = cfg["charging"]
        fleet = T.build_fleet(g, mob, cfg.fleet_spec(), seed=cfg.seed)
        n_days = max(ch["runs"], ch["point_runs"])
        out = {"fleet": fleet, "scenarios": {}}
        for name in cfg.scenario_names:
            sc = cfg.scenario(name)
            mc = T.monte_carlo_days(fleet, sc, n_days, seed=cfg.seed, dt_h=cfg.dt_h, n_zones=g.n_zones)
            prof = mc.head(ch["runs"])  # day streams are keyed by day, so a prefix is a shorter run
            pts = T.charging_point_requirements(mc.runs[:ch["point_runs"]], sc.shares, len(fleet), ch["round_to"])
            out["scenarios"][name] = {
                "mean": prof.mean, "total_sd": prof.total_sd,
                "run_totals": np.stack([p.total for p in prof.profiles]),
                "peaks_kw": prof.peaks_kw, "peak_times_h": prof.peak_times_h,
                "charging_counts": prof.charging_counts,
                "worst_case_kw": np.array([T.worst_case_peak(s) for s in prof.runs]),
                "points": pts, "sessions0": prof.runs[0],
            }
        levels = ch["power_sweep_kw"]
        out["power_sweep"] = T.peak_vs_power_sweep(
            fleet, levels, ch["arrivals"]["work_sd"], ch["arrivals"]["work_mean"], n_runs=ch["runs"],
            seed=cfg.seed, eta=ch["efficiency"], dt_h=cfg.dt_h) if levels else None
        e = np.linspace(0, 40, 81)
        out["probability_curve"] = {
            c.name: T.charging_probability_curve(e, c.battery_kwh, seed=cfg.seed)
            for c in cfg.fleet_spec().classes}
        out["probability_curve_e"] = e
        return out

    def _write_profiles(self, r):
        fleet = r["fleet"]
        summary = {}
        for name, s in r["scenarios"].items():
            T.write_profile_csv(self._out(f"profile_{name}.csv"), s["mean"], total_sd=s["total_sd"])
            T.write_sessions_csv(self._out(f"sessions_{name}_run0.csv"), s["sessions0"])
            with open(self._out(f"profile_runs_{name}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["time_h"] + [f"run_{k}_kw" for k in range(len(s["run_totals"]))])
                for b in range(s["run_totals"].shape[1]):
                    w.writerow([_num(b * self.cfg.dt_h, 4)] + [_num(v, 3) for v in s["run_totals"][:, b]])
            cnt = s["charging_counts"]
            summary[name] = {
                "peak_kw_mean": _num(s["peaks_kw"].mean(), 3), "peak_kw_runs": [_num(v, 3) for v in s["peaks_kw"]],
                "peak_time_h_runs": [_num(v, 4) for v in s["peak_times_h"]],
                "charging_fraction_mean": _num(cnt.mean() / max(len(fleet), 1)),
                "peak_kw_per_charging_ev": _num(s["peaks_kw"].mean() / max(cnt.mean(), 1), 4),
                "worst_case_kw_mean": _num(s["worst_case_kw"].mean(), 3),
                "energy_mwh_mean": _num(s["mean"].energy_kwh() / 1000.0, 4),
            }
            self._record("profiles", f"profile_{name}.csv", f"sessions_{name}_run0.csv", f"profile_runs_{name}.csv")
        with open(self._out("charging_points.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "location", "points_per_ev", "assigned_evs", "charging_points"])
            for name, s in r["scenarios"].items():
                for loc, v in s["points"].items():
                    w.writerow([name, loc, _num(v["ratio"], 4), _num(v["assigned_evs"], 1), v["points"]])
        if r["power_sweep"] is not None:
            ps = r["power_sweep"]
            with open(self._out("power_sweep.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["power_kw", "peak_kw_mean", "peak_kw_sd", "simultaneous_mean", "simultaneous_sd"])
                for k, p in enumerate(ps["power_kw"]):
                    w.writerow([p, _num(ps["peak_kw_mean"][k], 3), _num(ps["peak_kw_sd"][k], 3),
                                _num(ps["simultaneous_mean"][k]), _num(ps["simultaneous_sd"][k])])
            self._record("profiles", "power_sweep.csv")
        with open(self._out("charging_probability.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            names = list(r["probability_curve"])
            w.writerow(["e_daily_kwh"] + [f"{n}_{x}" for n in names for x in ("mean", "sd")])
            for k, e in enumerate(r["probability_curve_e"]):
                row = [_num(e, 3)]
                for n in names:
                    m, sd = r["probability_curve"][n]
                    row += [_num(m[k]), _num(sd[k])]
                w.writerow(row)
        km = fleet.e_daily / np.maximum(_consumption(fleet, self.cfg), 1e-12)
        counts, edges = np.histogram(km, bins=np.arange(0, max(80.0, km.max() + 2.0), 2.0))
        with open(self._out("commute_histogram.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["km_low", "km_high", "vehicles"])
            for k, c in enumerate(counts):
                w.writerow([edges[k], edges[k + 1], int(c)])
        summary["fleet"] = {"vehicles": len(fleet), "mean_two_way_km": _num(km.mean(), 4),
                            "mean_charge_probability": _num(fleet.charge_probability.mean())}
        self._out("profiles_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
        self._record("profiles", "charging_points.csv", "charging_probability.csv", "commute_histogram.csv",
                     "profiles_summary.json")

    def _weather(self):
        cfg = self.cfg
        site = cfg["site"]
        if cfg["pv"]["source"] == "pvgis":
            return W.fetch_pvgis_hourly(site["lat"], site["lon"], site["year"], tz_offset_h=site["tz_offset_h"])
        return W.read_weather(cfg.input_path("weather"), site["lat"], site["lon"], site["tz_offset_h"])

    def _run_pv(self):
        cfg = self.cfg
        w = self._weather()
        p = cfg["pv"]
        if p["tilt"] is None:
            tilt, az, _ = PV.optimal_orientation(w, cfg.pv_spec())
            if p["azimuth"] is not None:
                az = p["azimuth"]
        else:
            tilt, az = p["tilt"], p["azimuth"]
        prof = PV.pv_profile(w, cfg.pv_spec(tilt=tilt, azimuth=az))
        return {"profile": prof, "tilt": tilt, "azimuth": prof.azimuth, "tz_offset_h": w.tz_offset_h}

    def _write_pv(self, r):
        prof = r["profile"]
        with open(self._out("pv_hourly.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_utc", "kw_per_kwp"])
            for t, v in zip(prof.times, prof.power):
                w.writerow([str(t.astype("datetime64[m]")) + "Z", _num(v)])
        days, e = prof.daily_energy(r["tz_offset_h"])
        with open(self._out("pv_daily.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "kwh_per_kwp"])
            for d, v in zip(days, e):
                w.writerow([str(d), _num(v, 4)])
        summary = {"tilt_deg": r["tilt"], "azimuth_deg": r["azimuth"], "annual_yield_kwh_per_kwp":
                   _num(prof.annual_yield, 3)}
        self._out("pv_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
        self._record("pv", "pv_hourly.csv", "pv_daily.csv", "pv_summary.json")

    def _run_indicators(self):
        cfg = self.cfg
        fleet, pv = self._fleet(), self.result("pv")
        year = int(pv["profile"].times[len(pv["profile"].times) // 2].astype("datetime64[Y]").astype(int) + 1970)
        dates = A.weekdays(year, cfg["analysis"]["holidays"])
        loads = {n: A.daily_ev_loads(fleet, cfg.scenario(n), dates, cfg.seed, cfg.dt_h, cfg["threads"])
                 for n in cfg.scenario_names}
        return A.capacity_sweep(pv["profile"], loads, dates, len(fleet), cfg["analysis"]["capacities"],
                                pv["tz_offset_h"], cfg.dt_h)

    def _write_indicators(self, res):
        A.write_indicators_csv(self._out("indicators.csv"), res)
        A.write_monthly_csv(self._out("indicators_monthly.csv"), res)
        A.write_boxplot_json(self._out("indicators_boxplot.json"), res)
        self._record("indicators", "indicators.csv", "indicators_monthly.csv", "indicators_boxplot.json")

    def _run_report(self):
        cfg, g = self.cfg, self._grid()
        gr = cfg["grid"]
        ref = A.scale_reference_load(A.read_load_curve(cfg.input_path("national_load")), gr["study_population"],
                                     gr["region_population"], gr["region_peak_mw"])
        demand = self.result("demand")
        ev_mwh = {n: float(d.total.sum()) / 1000.0 for n, d in demand.items()}
        dyn = {}
        for sigma in gr["sales_shares"]:
            fd = A.FleetDynamics(gr["renewal_rate"], sigma, gr["initial_share"])
            try:
                dyn[str(sigma)] = A.time_to_share(gr["target_share"], fd)
            except ValueError:
                dyn[str(sigma)] = None
        return {"ref": ref, "ev_mwh": ev_mwh, "years_to_target": dyn, "n_ev": int(g.n_ev.sum())}

    def _write_report(self, r):
        ref = r["ref"]
        with open(self._out("reference_load.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["hour", "national_mw", "study_area_mw"])
            for h, (a, b) in enumerate(zip(ref.national_mw, ref.scaled_mw)):
                w.writerow([h, _num(a, 3), _num(b, 3)])
        rep = {
            "reference_load": {"share": _num(ref.share), "peak_mw": _num(ref.peak_mw, 3),
                               "daily_energy_mwh": _num(ref.daily_energy_mwh, 3)},
            "ev_demand_mwh_per_day": {k: _num(v, 4) for k, v in r["ev_mwh"].items()},
            "ev_uptake_percent": {k: _num(A.ev_uptake_report(v, ref), 4) for k, v in r["ev_mwh"].items()},
            "fleet_size": r["n_ev"],
            "years_to_target_share": {k: (None if v is None else _num(v, 4))
                                      for k, v in r["years_to_target"].items()},
            "target_share": _num(self.cfg["grid"]["target_share"]),
        }
        self._out("report.json").write_text(json.dumps(rep, indent=1, sort_keys=True))
        self._record("report", "reference_load.csv", "report.json")


def _consumption(fleet, cfg) -> np.ndarray:
    """Per-vehicle consumption (kWh/km) from the fleet's class index."""
    cons = np.array([c.consumption_kwh_per_km for c in cfg.fleet_spec().classes])
    return cons[fleet.vclass]


def run_pipeline(cfg: ScenarioConfig, out_dir, stages=STAGES) -> dict:
    """Run ``stages`` and return the manifest dict."""
    return Pipeline(cfg, out_dir).run(stages)
