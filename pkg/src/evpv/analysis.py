"""EV-PV complementarity indicators, fleet-share dynamics and grid-context scaling."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputDataError
from .pv.model import PVProfile
from .temporal import Fleet, Scenario, _bins, bin_occupancy, simulate_day


# --- indicators ---------------------------------------------------------------
# Series are bin samples of a periodic day on a uniform grid, for which the
# trapezoidal rule reduces to sum(values) * dt.

def _integral(p, dt_h):
    return float(np.sum(p) * dt_h)


def _pair(pv, ev):
    pv = np.asarray(pv, dtype=float)
    ev = np.asarray(ev, dtype=float)
    if pv.shape != ev.shape:
        raise ValueError("PV and EV series must share a time grid")
    return pv, ev


def self_sufficiency(pv_kw, ev_kw, dt_h=0.25):
    """Share of EV energy coincident with PV output; ``None`` without EV demand."""
    pv, ev = _pair(pv_kw, ev_kw)
    e_ev = _integral(ev, dt_h)
    if e_ev <= 0:
        return None
    return _integral(np.minimum(pv, ev), dt_h) / e_ev


def self_consumption(pv_kw, ev_kw, dt_h=0.25):
    """Share of PV energy absorbed by EV charging; ``None`` without PV output."""
    pv, ev = _pair(pv_kw, ev_kw)
    e_pv = _integral(pv, dt_h)
    if e_pv <= 0:
        return None
    return _integral(np.minimum(pv, ev), dt_h) / e_pv


def energy_coverage(pv_kw, ev_kw, dt_h=0.25):
    """PV energy over EV energy, ignoring timing; ``None`` without EV demand."""
    pv, ev = _pair(pv_kw, ev_kw)
    e_ev = _integral(ev, dt_h)
    if e_ev <= 0:
        return None
    return _integral(pv, dt_h) / e_ev


def weekdays(year: int, holidays=()) -> np.ndarray:
    """Monday-Friday dates of ``year`` minus ``holidays`` (datetime64[D])."""
    days = np.arange(np.datetime64(f"{year}-01-01"), np.datetime64(f"{year + 1}-01-01"))
    wd = days[np.is_busday(days)]
    if len(holidays):
        wd = wd[~np.isin(wd, np.asarray(holidays, dtype="datetime64[D]"))]
    return wd


def pv_on_day(profile: PVProfile, date, tz_offset_h: float, dt_h: float = 0.25) -> np.ndarray:
    """kW/kWp at the bin midpoints of local ``date``, linearly interpolated."""
    nb = _bins(dt_h)
    start = (np.datetime64(date, "D") - np.timedelta64(int(round(tz_offset_h * 3600)), "s")).astype("datetime64[s]")
    t = start.astype("int64") + (np.arange(nb) + 0.5) * dt_h * 3600.0
    src = profile.times.astype("datetime64[s]").astype("int64")
    return np.interp(t, src, profile.power, left=0.0, right=0.0)


def total_load(sessions, dt_h: float = 0.25) -> np.ndarray:
    """Aggregate bin-averaged power (kW) of a session table."""
    nb = _bins(dt_h)
    if not len(sessions):
        return np.zeros(nb)
    return sessions.power_kw @ bin_occupancy(sessions, dt_h) / dt_h


def day_of_year(date) -> int:
    d = np.datetime64(date, "D")
    return int((d - d.astype("datetime64[Y]").astype("datetime64[D]")).astype(int))


def daily_ev_loads(fleet: Fleet, scenario: Scenario, dates, seed: int, dt_h: float = 0.25,
                   threads: int | None = None) -> np.ndarray:
    """One load realisation per date, seeded by (seed, day of year). Shape (days, bins)."""
    def one(d):
        return total_load(simulate_day(fleet, scenario, seed, day_of_year(d)), dt_h)

    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        return np.stack(list(pool.map(one, dates)))


def box_stats(values) -> dict:
    """Boxplot summary with 1.5 IQR whiskers; NaNs (absent days) are dropped."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"n": 0, "mean": None, "median": None, "q1": None, "q3": None,
                "whisker_low": None, "whisker_high": None, "outliers": []}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    out = v[(v < q1 - 1.5 * iqr) | (v > q3 + 1.5 * iqr)]
    return {"n": int(v.size), "mean": float(v.mean()), "median": float(med), "q1": float(q1), "q3": float(q3),
            "whisker_low": float(inside.min()), "whisker_high": float(inside.max()),
            "outliers": sorted(float(x) for x in out)}


@dataclass
class ComplementarityResult:
    scenario: str
    capacity_kwp_per_ev: float
    dates: np.ndarray
    ss: np.ndarray  # NaN where undefined
    sc: np.ndarray
    coverage: np.ndarray
    pv_kwh_per_ev: np.ndarray
    ev_kwh_per_ev: np.ndarray

    def stats(self) -> dict:
        return box_stats(self.ss)

    def monthly(self) -> dict:
        """{month: (mean SS, sd SS, n days)} over days with a defined SS."""
        months = self.dates.astype("datetime64[M]").astype(int) % 12 + 1
        out = {}
        for m in range(1, 13):
            v = self.ss[(months == m) & np.isfinite(self.ss)]
            if v.size:
                out[m] = (float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0, int(v.size))
        return out


def _nan(x):
    return np.nan if x is None else x


def complementarity(scenario: str, capacity: float, pv: PVProfile, ev_loads, dates, n_ev: int,
                    tz_offset_h: float, dt_h: float = 0.25) -> ComplementarityResult:
    if capacity < 0:
        raise ConfigError("PV capacity must be non-negative")
    if n_ev <= 0:
        raise InputDataError("fleet size must be positive")
    n = len(dates)
    ss, sc, cov, e_pv, e_ev = (np.empty(n) for _ in range(5))
    for k, d in enumerate(dates):
        p = capacity * n_ev * pv_on_day(pv, d, tz_offset_h, dt_h)
        ev = ev_loads[k]
        ss[k] = _nan(self_sufficiency(p, ev, dt_h))
        sc[k] = _nan(self_consumption(p, ev, dt_h))
        cov[k] = _nan(energy_coverage(p, ev, dt_h))
        e_pv[k] = _integral(p, dt_h) / n_ev
        e_ev[k] = _integral(ev, dt_h) / n_ev
    return ComplementarityResult(scenario, float(capacity), np.asarray(dates), ss, sc, cov, e_pv, e_ev)


def capacity_sweep(pv: PVProfile, ev_loads: dict, dates, n_ev: int, capacities=(0.5, 1.0, 1.5, 2.0),
                   tz_offset_h: float = 3.0, dt_h: float = 0.25) -> dict:
    """Daily indicators for every scenario x capacity (kWp per EV).

    ``ev_loads`` maps scenario name to a (days, bins) array aligned with ``dates``.
    Returns {(scenario, capacity): ComplementarityResult}.
    """
    out = {}
    for name, loads in ev_loads.items():
        if len(loads) != len(dates):
            raise ValueError(f"{name}: {len(loads)} daily loads for {len(dates)} dates")
        for c in capacities:
            out[(name, float(c))] = complementarity(name, c, pv, loads, dates, n_ev, tz_offset_h, dt_h)
    return out


def _fmt(x):
    return "" if not np.isfinite(x) else f"{x:.6f}"


def write_indicators_csv(path, results: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "scenario", "capacity_kwp_per_ev", "self_sufficiency", "self_consumption", "coverage"])
        for (name, cap), r in results.items():
            for k, d in enumerate(r.dates):
                w.writerow([str(d), name, cap, _fmt(r.ss[k]), _fmt(r.sc[k]), _fmt(r.coverage[k])])


def write_monthly_csv(path, results: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "capacity_kwp_per_ev", "month", "ss_mean", "ss_sd", "n_days"])
        for (name, cap), r in results.items():
            for m, (mean, sd, n) in r.monthly().items():
                w.writerow([name, cap, m, f"{mean:.6f}", f"{sd:.6f}", n])


def write_boxplot_json(path, results: dict) -> None:
    doc = [{"scenario": name, "capacity_kwp_per_ev": cap, **r.stats(),
            "mean_pv_kwh_per_ev": float(np.mean(r.pv_kwh_per_ev)),
            "mean_ev_kwh_per_ev": float(np.mean(r.ev_kwh_per_ev))}
           for (name, cap), r in results.items()]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


# --- fleet dynamics -----------------------------------------------------------

@dataclass(frozen=True)
class FleetDynamics:
    renewal_rate: float  # lambda, 1/years
    sigma: float  # EV share of new registrations
    s0: float = 0.0

    def __post_init__(self):
        if not self.renewal_rate > 0:
            raise ConfigError("renewal rate must be positive")
        if not (0 <= self.sigma <= 1 and 0 <= self.s0 <= 1):
            raise ConfigError("fleet shares must lie in [0, 1]")


def fleet_share(t, dyn: FleetDynamics):
    """EV share of the fleet after ``t`` years of renewal at constant sales share."""
    s = dyn.sigma + (dyn.s0 - dyn.sigma) * np.exp(-dyn.renewal_rate * np.asarray(t, dtype=float))
    return float(s) if np.ndim(s) == 0 else s


def time_to_share(target: float, dyn: FleetDynamics) -> float:
    """Years until the fleet share reaches ``target`` (inverse of :func:`fleet_share`)."""
    if not dyn.s0 < target < dyn.sigma:
        raise ValueError(f"target share {target} is unreachable from s0={dyn.s0} with sales share {dyn.sigma}")
    return math.log((dyn.sigma - dyn.s0) / (dyn.sigma - target)) / dyn.renewal_rate


# --- grid context -------------------------------------------------------------

@dataclass
class ReferenceLoad:
    national_mw: np.ndarray  # hourly, 24 values
    share: float

    @property
    def scaled_mw(self) -> np.ndarray:
        return self.share * self.national_mw

    @property
    def peak_mw(self) -> float:
        return float(self.scaled_mw.max())

    @property
    def daily_energy_mwh(self) -> float:
        return float(self.scaled_mw.sum() * 24.0 / self.national_mw.size)


def scale_reference_load(national_mw, study_population: float, region_population: float,
                         region_peak_mw: float | None = None) -> ReferenceLoad:
    """Scale a national daily curve to a study area.

    The study area's peak is taken as the region's peak (the national peak
    when ``region_peak_mw`` is None) times its population share of the region.
    """
    national = np.asarray(national_mw, dtype=float)
    if study_population <= 0 or region_population <= 0:
        raise InputDataError("populations must be positive")
    if national.ndim != 1 or national.size == 0 or national.max() <= 0:
        raise InputDataError("national load curve must be a non-empty positive series")
    frac = study_population / region_population
    share = frac if region_peak_mw is None else frac * region_peak_mw / national.max()
    return ReferenceLoad(national_mw=national, share=share)


def read_load_curve(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "load_mw" not in rows[0]:
        raise InputDataError(f"{path}: expected a 'load_mw' column")
    try:
        return np.array([float(r["load_mw"]) for r in rows])
    except ValueError as exc:
        raise InputDataError(f"{path}: non-numeric load value") from exc


def ev_uptake_report(ev_daily_mwh: float, ref: ReferenceLoad) -> float:
    """EV charging energy as a percentage of the study area's daily demand."""
    return 100.0 * ev_daily_mwh / ref.daily_energy_mwh
