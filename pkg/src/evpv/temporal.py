"""Stochastic charging decisions, charging sessions and daily load profiles.

The fleet is held column-wise (one numpy array per attribute) so a day for
100k vehicles is simulated in a few vectorised passes. :class:`Vehicle` and
:class:`ChargingSession` are row views for single-item use.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputDataError
from .mobility import MobilityResult
from .rng import stream
from .spatial import LOCATIONS, ChargingShares, FleetSpec
from .zoning import ZoneGrid, largest_remainder

HOME, WORK, POI = 0, 1, 2
USABLE_FRACTION = 0.8
SOC0_MEAN, SOC0_SD = 0.6, 0.2
SOC0_BOUNDS = (0.0, 1.0)


@dataclass(frozen=True)
class ArrivalModel:
    home_mean: float = 18.0
    home_sd: float = 2.7
    work_mean: float = 9.0
    work_sd: float = 1.8


@dataclass(frozen=True)
class ChargerMix:
    """(power kW, probability) options per charging location."""

    home: tuple = ((3.2, 0.45), (7.4, 0.40), (11.0, 0.15))
    work: tuple = ((7.4, 0.25), (11.0, 0.50), (22.0, 0.25))
    poi: tuple = ((7.4, 0.15), (11.0, 0.15), (22.0, 0.55), (50.0, 0.15))

    def __post_init__(self):
        for loc in LOCATIONS:
            opts = getattr(self, loc)
            if not opts:
                continue
            if any(p <= 0 for p, _ in opts) or any(q < 0 for _, q in opts):
                raise ConfigError(f"invalid charger options at {loc}")
            if abs(sum(q for _, q in opts) - 1.0) > 1e-9:
                raise ConfigError(f"charger probabilities at {loc} must sum to 1")

    def options(self, loc: str):
        opts = getattr(self, loc)
        if not opts:
            raise ConfigError(f"no charger options configured for location {loc!r}")
        powers, probs = zip(*opts)
        return np.array(powers, dtype=float), np.array(probs, dtype=float)

    def mean_power(self, loc: str, cap: float = math.inf) -> float:
        p, q = self.options(loc)
        return float(np.dot(np.minimum(p, cap), q))


@dataclass(frozen=True)
class Scenario:
    shares: ChargingShares
    arrivals: ArrivalModel = field(default_factory=ArrivalModel)
    chargers: ChargerMix = field(default_factory=ChargerMix)
    eta: float = 0.9

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ConfigError("charging efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class Vehicle:
    id: int
    vclass: str
    home_zone: int
    e_daily: float
    soc0: float
    delta_n: float
    battery_kwh: float
    max_power_kw: float


@dataclass
class Fleet:
    class_names: tuple
    vclass: np.ndarray  # index into class_names
    home_zone: np.ndarray
    e_daily: np.ndarray  # kWh/day drawn from the battery
    soc0: np.ndarray
    delta_n: np.ndarray
    battery_kwh: np.ndarray
    max_power_kw: np.ndarray
    trip_p: np.ndarray  # [zone, zone] destination probabilities
    poi_weights: np.ndarray  # per zone, sums to 1 (or all zero)

    def __len__(self):
        return self.e_daily.size

    def vehicle(self, i: int) -> Vehicle:
        return Vehicle(id=i, vclass=self.class_names[self.vclass[i]], home_zone=int(self.home_zone[i]),
                       e_daily=float(self.e_daily[i]), soc0=float(self.soc0[i]),
                       delta_n=float(self.delta_n[i]), battery_kwh=float(self.battery_kwh[i]),
                       max_power_kw=float(self.max_power_kw[i]))

    @property
    def charge_probability(self) -> np.ndarray:
        return 1.0 / self.delta_n


@dataclass(frozen=True)
class ChargingSession:
    vehicle: int
    location: str
    zone: int
    power_kw: float
    t_arrival: float
    t_end: float
    energy_kwh: float  # delivered to the battery


@dataclass
class SessionTable:
    vehicle: np.ndarray
    location: np.ndarray  # HOME / WORK / POI
    zone: np.ndarray
    power_kw: np.ndarray
    t_arrival: np.ndarray  # hours in [0, 24)
    t_end: np.ndarray  # hours, may exceed 24
    energy_kwh: np.ndarray
    eta: float = 0.9

    def __len__(self):
        return self.vehicle.size

    @property
    def duration_h(self):
        return self.t_end - self.t_arrival

    @property
    def grid_energy_kwh(self):
        return self.energy_kwh / self.eta

    def select(self, mask) -> "SessionTable":
        return SessionTable(self.vehicle[mask], self.location[mask], self.zone[mask], self.power_kw[mask],
                            self.t_arrival[mask], self.t_end[mask], self.energy_kwh[mask], self.eta)

    def __iter__(self):
        for k in range(len(self)):
            yield ChargingSession(int(self.vehicle[k]), LOCATIONS[self.location[k]], int(self.zone[k]),
                                  float(self.power_kw[k]), float(self.t_arrival[k]), float(self.t_end[k]),
                                  float(self.energy_kwh[k]))


@dataclass
class LoadProfile:
    dt_h: float
    per_zone: np.ndarray  # [zone, bin] kW
    run: int = 0

    @property
    def total(self) -> np.ndarray:
        return self.per_zone.sum(axis=0)

    @property
    def times_h(self) -> np.ndarray:
        return np.arange(self.per_zone.shape[1]) * self.dt_h

    def energy_kwh(self) -> float:
        return float(self.per_zone.sum() * self.dt_h)


# --- per-vehicle draws --------------------------------------------------------

def sample_soc0(rng: np.random.Generator, size=None):
    """Charging threshold: normal(0.6, 0.2) clipped to the valid range [0, 1].

    A threshold at 1 means the driver plugs in every day.
    """
    lo, hi = SOC0_BOUNDS
    out = np.clip(rng.normal(SOC0_MEAN, SOC0_SD, size), lo, hi)
    return float(out) if size is None else out


def charging_interval(e_daily, battery_kwh, soc0):
    """Mean number of days between charging events (>= 1, inf if no use)."""
    e = np.asarray(e_daily, dtype=float)
    q = np.asarray(battery_kwh, dtype=float)
    if np.any(q <= 0):
        raise InputDataError("battery capacity must be positive")
    dsoc = e / (USABLE_FRACTION * q)
    with np.errstate(divide="ignore"):
        dn = np.where(dsoc > 0, np.maximum(1.0, (1.0 - np.asarray(soc0)) / np.where(dsoc > 0, dsoc, 1.0)), np.inf)
    return float(dn) if dn.ndim == 0 else dn


def decide_charging_today(delta_n, rng: np.random.Generator):
    dn = np.asarray(delta_n, dtype=float)
    if np.any(dn < 1):
        raise ValueError("delta_n must be >= 1")
    draws = rng.random(dn.shape)
    out = draws < 1.0 / dn
    return bool(out) if out.ndim == 0 else out


def charging_probability_curve(e_daily, battery_kwh, n_samples=50_000, seed=0):
    """Mean and sd of the daily charging probability over sampled thresholds."""
    soc0 = sample_soc0(stream(seed, "probability-curve"), n_samples)
    e = np.atleast_1d(np.asarray(e_daily, dtype=float))
    prob = 1.0 / charging_interval(e[:, None], battery_kwh, soc0[None, :])
    return prob.mean(axis=1), prob.std(axis=1)


def _draw_rows(cum, rows, rng):
    """Categorical draw per element from rows of a cumulative-probability table."""
    u = rng.random(rows.size)
    out = np.empty(rows.size, dtype=np.int64)
    for r in np.unique(rows):
        sel = rows == r
        out[sel] = np.searchsorted(cum[r], u[sel], side="left")
    return np.minimum(out, cum.shape[1] - 1)


def build_fleet(grid: ZoneGrid, mob: MobilityResult, spec: FleetSpec, seed: int = 0) -> Fleet:
    """Create one vehicle per allocated EV with its steady-state charging interval.

    Class counts follow the fleet shares exactly (largest remainder). Each
    vehicle's daily energy comes from one draw of its home zone's commuting
    distance distribution.
    """
    n_tot = int(grid.n_ev.sum())
    home = np.repeat(np.arange(grid.n_zones), grid.n_ev)
    rng = stream(seed, "fleet")
    counts = largest_remainder([c.share for c in spec.classes], n_tot)
    vclass = rng.permutation(np.repeat(np.arange(len(spec.classes)), counts))

    cum = np.cumsum(mob.weights, axis=1)
    dest = _draw_rows(cum, home, rng)
    cons = np.array([c.consumption_kwh_per_km for c in spec.classes])[vclass]
    e_daily = mob.two_way_km[home, dest] * cons
    battery = np.array([c.battery_kwh for c in spec.classes])[vclass]
    soc0 = sample_soc0(rng, n_tot)
    m = np.asarray(grid.pois, dtype=float)
    return Fleet(
        class_names=tuple(c.name for c in spec.classes), vclass=vclass, home_zone=home,
        e_daily=e_daily, soc0=soc0, delta_n=charging_interval(e_daily, battery, soc0),
        battery_kwh=battery, max_power_kw=np.array([c.max_power_kw for c in spec.classes])[vclass],
        trip_p=mob.weights, poi_weights=m / m.sum() if m.sum() > 0 else m,
    )


def _sample(fleet: Fleet, idx: np.ndarray, sc: Scenario, rng: np.random.Generator) -> SessionTable:
    n = idx.size
    shares = sc.shares.as_array()
    loc = rng.choice(3, size=n, p=shares)
    arr = sc.arrivals

    t = np.empty(n)
    h = loc == HOME
    t[h] = rng.normal(arr.home_mean, arr.home_sd, int(h.sum()))
    w = loc == WORK
    t[w] = rng.normal(arr.work_mean, arr.work_sd, int(w.sum()))
    p = np.flatnonzero(loc == POI)
    if p.size:
        tw = rng.normal(arr.work_mean, arr.work_sd, p.size)
        th = rng.normal(arr.home_mean, arr.home_sd, p.size)
        bad = th <= tw
        while bad.any():
            k = int(bad.sum())
            tw[bad] = rng.normal(arr.work_mean, arr.work_sd, k)
            th[bad] = rng.normal(arr.home_mean, arr.home_sd, k)
            bad = th <= tw
        t[p] = rng.uniform(tw, th)
    t = np.mod(t, 24.0)

    power = np.empty(n)
    for code, name in enumerate(LOCATIONS):
        sel = loc == code
        if not sel.any():
            continue
        opts, probs = sc.chargers.options(name)
        power[sel] = opts[rng.choice(opts.size, size=int(sel.sum()), p=probs)]
    power = np.minimum(power, fleet.max_power_kw[idx])

    zone = fleet.home_zone[idx].copy()
    w = np.flatnonzero(loc == WORK)
    if w.size:
        zone[w] = _draw_rows(np.cumsum(fleet.trip_p, axis=1), fleet.home_zone[idx[w]], rng)
    if p.size:
        if fleet.poi_weights.sum() <= 0:
            raise InputDataError("no POIs to host charging sessions")
        zone[p] = _draw_rows(np.cumsum(fleet.poi_weights)[None, :], np.zeros(p.size, dtype=np.int64), rng)

    energy = fleet.delta_n[idx] * fleet.e_daily[idx]
    t_end = t + energy / (sc.eta * power)
    return SessionTable(vehicle=idx, location=loc, zone=zone, power_kw=power, t_arrival=t,
                        t_end=t_end, energy_kwh=energy, eta=sc.eta)


def sample_session(v: Vehicle, scenario: Scenario, rng: np.random.Generator, trip_p=None,
                   poi_weights=None) -> ChargingSession:
    """Session for a single vehicle that has decided to charge today."""
    nz = v.home_zone + 1
    trip_p = np.eye(nz)[None, v.home_zone] if trip_p is None else np.atleast_2d(trip_p)
    if trip_p.shape[0] <= v.home_zone:
        trip_p = np.vstack([np.zeros((v.home_zone + 1 - trip_p.shape[0], trip_p.shape[1])), trip_p])
    pw = np.ones(trip_p.shape[1]) / trip_p.shape[1] if poi_weights is None else np.asarray(poi_weights, float)
    one = Fleet(class_names=(v.vclass,), vclass=np.zeros(1, dtype=np.int64),
                home_zone=np.array([v.home_zone]), e_daily=np.array([v.e_daily]), soc0=np.array([v.soc0]),
                delta_n=np.array([v.delta_n]), battery_kwh=np.array([v.battery_kwh]),
                max_power_kw=np.array([v.max_power_kw]), trip_p=trip_p, poi_weights=pw)
    s = _sample(one, np.array([0]), scenario, rng)
    return ChargingSession(v.id, LOCATIONS[s.location[0]], int(s.zone[0]), float(s.power_kw[0]),
                           float(s.t_arrival[0]), float(s.t_end[0]), float(s.energy_kwh[0]))


def simulate_day(fleet: Fleet, scenario: Scenario, seed: int, day: int) -> SessionTable:
    """All sessions of one day; the stream depends only on (seed, day)."""
    rng = stream(seed, "day", day)
    charges = decide_charging_today(fleet.delta_n, rng)
    return _sample(fleet, np.flatnonzero(charges), scenario, rng)


# --- aggregation --------------------------------------------------------------

def _bins(dt_h):
    nb = 24.0 / dt_h
    if abs(nb - round(nb)) > 1e-9 or dt_h <= 0:
        raise ValueError("time step must divide 24 h")
    return int(round(nb))


def _periodic_time_in_bins(t, dt_h, nbins):
    """Time spent in each daily bin over [0, t), wrapping every 24 h. Shape (len(t), nbins)."""
    days = np.floor(t / 24.0)
    r = t - 24.0 * days
    edges = np.arange(nbins) * dt_h
    return days[:, None] * dt_h + np.clip(r[:, None] - edges[None, :], 0.0, dt_h)


def bin_occupancy(sessions: SessionTable, dt_h: float = 0.25, chunk: int = 20_000) -> np.ndarray:
    """Hours each session spends in each bin, (n_sessions, n_bins). Midnight wraps."""
    nbins = _bins(dt_h)
    out = np.empty((len(sessions), nbins))
    for s in range(0, len(sessions), chunk):
        sl = slice(s, s + chunk)
        out[sl] = (_periodic_time_in_bins(sessions.t_end[sl], dt_h, nbins)
                   - _periodic_time_in_bins(sessions.t_arrival[sl], dt_h, nbins))
    return out


def aggregate_load(sessions: SessionTable, dt_h: float = 0.25, n_zones: int | None = None,
                   run: int = 0) -> LoadProfile:
    """Bin-averaged power per zone from rectangular charging pulses."""
    nbins = _bins(dt_h)
    if n_zones is None:
        n_zones = int(sessions.zone.max()) + 1 if len(sessions) else 1
    out = np.zeros((n_zones, nbins))
    if len(sessions):
        occ = bin_occupancy(sessions, dt_h)
        np.add.at(out, sessions.zone, occ * (sessions.power_kw[:, None] / dt_h))
    return LoadProfile(dt_h=dt_h, per_zone=out, run=run)


def max_simultaneous(sessions: SessionTable) -> int:
    """Exact peak number of concurrently active sessions over a periodic day."""
    if not len(sessions):
        return 0
    dur = sessions.duration_h
    full = np.floor(dur / 24.0)
    rem = dur - 24.0 * full
    a = sessions.t_arrival
    b = a + rem
    wraps = b > 24.0
    starts = np.concatenate([a, np.zeros(int(wraps.sum()))])
    ends = np.concatenate([np.where(wraps, 24.0, b), b[wraps] - 24.0])
    times = np.concatenate([starts, ends])
    delta = np.concatenate([np.ones(starts.size), -np.ones(ends.size)])
    order = np.lexsort((delta, times))  # ends before starts at equal time
    return int(full.sum() + np.cumsum(delta[order]).max())


def worst_case_peak(sessions: SessionTable) -> float:
    """Load if every vehicle charging that day were plugged in at once (kW)."""
    return float(np.sum(sessions.power_kw))


@dataclass
class MonteCarloResult:
    dt_h: float
    mean: LoadProfile
    sd: LoadProfile
    runs: list  # SessionTable per day
    profiles: list  # LoadProfile per day
    total_sd: np.ndarray = None  # sd of the aggregate series across runs

    @property
    def peaks_kw(self) -> np.ndarray:
        return np.array([p.total.max() for p in self.profiles])

    @property
    def peak_times_h(self) -> np.ndarray:
        return np.array([p.times_h[np.argmax(p.total)] for p in self.profiles])

    @property
    def charging_counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.runs])

    def head(self, n: int) -> "MonteCarloResult":
        """Statistics over the first ``n`` runs only."""
        if not 1 <= n <= len(self.runs):
            raise ValueError(f"need 1 <= n <= {len(self.runs)}")
        if n == len(self.runs):
            return self
        return _summarise(self.dt_h, self.runs[:n], self.profiles[:n])


def monte_carlo_days(fleet: Fleet, scenario: Scenario, n_runs: int = 5, seed: int = 0, dt_h: float = 0.25,
                     n_zones: int | None = None, first_day: int = 0) -> MonteCarloResult:
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if n_zones is None:
        n_zones = fleet.trip_p.shape[0]
    runs, profiles = [], []
    for r in range(n_runs):
        s = simulate_day(fleet, scenario, seed, first_day + r)
        runs.append(s)
        profiles.append(aggregate_load(s, dt_h, n_zones, run=r))
    return _summarise(dt_h, runs, profiles)


def _summarise(dt_h, runs, profiles) -> MonteCarloResult:
    stack = np.stack([p.per_zone for p in profiles])
    totals = stack.sum(axis=1)
    if len(profiles) > 1:
        sd, total_sd = stack.std(axis=0, ddof=1), totals.std(axis=0, ddof=1)
    else:
        sd, total_sd = np.zeros_like(stack[0]), np.zeros(totals.shape[1])
    return MonteCarloResult(dt_h, LoadProfile(dt_h, stack.mean(axis=0)), LoadProfile(dt_h, sd), runs, profiles,
                            total_sd)


def _ceil_to(x, step):
    return int(math.ceil(round(x / step, 9)) * step)


def charging_point_requirements(runs, shares: ChargingShares, n_tot: int, round_to: int = 500) -> dict:
    """Charging points per assigned EV and rounded-up counts per location.

    Home needs a dedicated point per EV. Work needs one per EV charging that
    day (mean over runs). POI points are released after charging, so the
    need is the peak number charging at once (mean over runs).
    """
    if not runs:
        raise ValueError("need at least one run")
    out = {}
    for code, name in enumerate(LOCATIONS):
        f = getattr(shares, name)
        if f == 0:
            continue
        assigned = f * n_tot
        if assigned <= 0:
            raise InputDataError(f"no EVs assigned to {name} despite a nonzero share")
        if code == HOME:
            ratio = 1.0
        elif code == WORK:
            ratio = float(np.mean([np.sum(s.location == WORK) for s in runs])) / assigned
        else:
            ratio = float(np.mean([max_simultaneous(s.select(s.location == POI)) for s in runs])) / assigned
        out[name] = {"ratio": ratio, "assigned_evs": assigned, "points": _ceil_to(ratio * assigned, round_to)}
    return out


def peak_vs_power_sweep(fleet: Fleet, power_levels, arrival_sd: float = 1.8, arrival_mean: float = 9.0,
                        n_runs: int = 5, seed: int = 0, eta: float = 0.9, dt_h: float = 0.25) -> dict:
    """Peak load and peak simultaneous share for single-power charging scenarios.

    All power levels reuse the same day streams, so differences between
    levels come from the charging power alone.
    """
    levels = np.asarray(power_levels, dtype=float)
    peak = np.zeros((levels.size, n_runs))
    simul = np.zeros((levels.size, n_runs))
    for k, pw in enumerate(levels):
        sc = Scenario(shares=ChargingShares(0.0, 1.0, 0.0),
                      arrivals=ArrivalModel(work_mean=arrival_mean, work_sd=arrival_sd),
                      chargers=ChargerMix(home=(), work=((float(pw), 1.0),), poi=()), eta=eta)
        for r in range(n_runs):
            s = simulate_day(fleet, sc, seed, r)
            peak[k, r] = aggregate_load(s, dt_h, 1 if len(s) == 0 else None).total.max() if len(s) else 0.0
            simul[k, r] = max_simultaneous(s) / len(s) if len(s) else 0.0
    sd = (lambda a: a.std(axis=1, ddof=1)) if n_runs > 1 else (lambda a: np.zeros(a.shape[0]))
    return {"power_kw": levels, "peak_kw_mean": peak.mean(axis=1), "peak_kw_sd": sd(peak),
            "simultaneous_mean": simul.mean(axis=1), "simultaneous_sd": sd(simul),
            "peak_kw": peak, "simultaneous": simul}


# --- export -------------------------------------------------------------------

def _iso(date: dt.date, hours: float) -> str:
    base = dt.datetime.combine(date, dt.time())
    return (base + dt.timedelta(seconds=round(hours * 3600))).isoformat()


def write_sessions_csv(path, sessions: SessionTable, date=dt.date(2020, 1, 1)):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vehicle", "location", "zone", "power_kw", "start", "end", "energy_kwh", "grid_energy_kwh"])
        for s in sessions:
            w.writerow([s.vehicle, s.location, s.zone, s.power_kw, _iso(date, s.t_arrival), _iso(date, s.t_end),
                        round(s.energy_kwh, 4), round(s.energy_kwh / sessions.eta, 4)])


def write_profile_csv(path, profile: LoadProfile, date=dt.date(2020, 1, 1), total_sd=None):
    nz = profile.per_zone.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["time"] + [f"zone_{i}_kw" for i in range(nz)] + ["total_kw"]
        if total_sd is not None:
            head.append("total_sd_kw")
        w.writerow(head)
        tot = profile.total
        for k, t in enumerate(profile.times_h):
            row = [_iso(date, t)] + [round(float(v), 3) for v in profile.per_zone[:, k]] + [round(float(tot[k]), 3)]
            if total_sd is not None:
                row.append(round(float(total_sd[k]), 3))
            w.writerow(row)
