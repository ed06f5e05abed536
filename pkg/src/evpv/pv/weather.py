"""Hourly weather series: CSV I/O, PVGIS download and consistency checks."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import httpx
import numpy as np

from ..errors import ExternalServiceError, InputDataError

log = logging.getLogger(__name__)

PVGIS_URL = "https://re.jrc.ec.europa.eu/api/v5_2/seriescalc"
COLUMNS = ("time", "G(h)", "Gb(n)", "Gd(h)", "T2m", "WS10m")


@dataclass
class WeatherSeries:
    times: np.ndarray  # datetime64[s], UTC
    ghi: np.ndarray
    dni: np.ndarray
    dhi: np.ndarray
    t_amb: np.ndarray
    wind: np.ndarray
    lat: float
    lon: float
    tz_offset_h: float = 3.0

    def __post_init__(self):
        n = len(self.times)
        for name in ("ghi", "dni", "dhi", "t_amb", "wind"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise InputDataError(f"weather column {name} has {a.size} values, expected {n}")
            if not np.all(np.isfinite(a)):
                raise InputDataError(f"weather column {name} contains missing values")
            setattr(self, name, a)
        if np.any(self.ghi < 0) or np.any(self.dni < 0) or np.any(self.dhi < 0):
            raise InputDataError("negative irradiance in weather data")
        if n > 1 and np.any(np.diff(self.times.astype("int64")) <= 0):
            raise InputDataError("weather timestamps must be strictly increasing")


def _parse_time(s: str) -> np.datetime64:
    s = s.strip()
    if len(s) == 13 and s[8] == ":":  # PVGIS 20200101:0010
        s = f"{s[0:4]}-{s[4:6]}-{s[6:8]}T{s[9:11]}:{s[11:13]}"
    s = s.rstrip("Z")
    if "+" in s[10:]:
        s = s[:10] + s[10:].split("+")[0]  # only UTC stamps are written; drop a +00:00 suffix
    try:
        return np.datetime64(s, "s")
    except ValueError as exc:
        raise InputDataError(f"unparseable timestamp {s!r}") from exc


def read_weather_csv(path, lat, lon, tz_offset_h=3.0, check=True) -> WeatherSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputDataError(f"{path}: empty weather file")
    missing = [c for c in COLUMNS if c not in rows[0]]
    if missing:
        raise InputDataError(f"{path}: missing weather columns {missing}")
    try:
        cols = {c: np.array([float(r[c]) for r in rows]) for c in COLUMNS[1:]}
    except (TypeError, ValueError) as exc:
        raise InputDataError(f"{path}: non-numeric weather value ({exc})") from exc
    w = WeatherSeries(
        times=np.array([_parse_time(r["time"]) for r in rows]),
        ghi=cols["G(h)"], dni=cols["Gb(n)"], dhi=cols["Gd(h)"], t_amb=cols["T2m"], wind=cols["WS10m"],
        lat=float(lat), lon=float(lon), tz_offset_h=tz_offset_h,
    )
    if check:
        check_consistency(w)
    return w


def write_weather_csv(path, w: WeatherSeries) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(COLUMNS)
        for k in range(len(w.times)):
            out.writerow([str(w.times[k].astype("datetime64[m]")) + "Z", f"{w.ghi[k]:.2f}", f"{w.dni[k]:.2f}",
                          f"{w.dhi[k]:.2f}", f"{w.t_amb[k]:.2f}", f"{w.wind[k]:.2f}"])


def check_consistency(w: WeatherSeries, tol=0.05, min_ghi=50.0) -> float:
    """Fraction of daylight steps where GHI differs from DHI + DNI cos(Z) by more than ``tol``.

    A warning is logged when any step is out of tolerance.
    """
    from .solar import solar_position

    zen, _ = solar_position(w.times, w.lat, w.lon)
    mask = (w.ghi > min_ghi) & (zen < 90)
    if not mask.any():
        return 0.0
    closure = w.dhi + w.dni * np.cos(np.radians(zen))
    bad = np.abs(closure[mask] - w.ghi[mask]) > tol * w.ghi[mask]
    frac = float(bad.mean())
    if frac > 0:
        log.warning("GHI closure off by more than %.0f%% in %.1f%% of daylight hours", tol * 100, frac * 100)
    return frac


def fetch_pvgis_hourly(lat, lon, year=2020, client: httpx.Client | None = None, url=PVGIS_URL,
                       timeout=60.0, tz_offset_h=3.0) -> WeatherSeries:
    """Download one year of hourly horizontal irradiance from PVGIS."""
    params = {"lat": lat, "lon": lon, "startyear": year, "endyear": year, "components": 1,
              "outputformat": "json", "angle": 0}
    own = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        resp = client.get(url, params=params)
    except httpx.HTTPError as exc:
        raise ExternalServiceError(f"PVGIS request failed: {exc!r}") from exc
    finally:
        if own:
            client.close()
    if resp.status_code != 200:
        raise ExternalServiceError(f"PVGIS returned HTTP {resp.status_code}")
    try:
        doc = resp.json()
    except ValueError as exc:
        raise ExternalServiceError(f"unexpected PVGIS payload: {exc!r}") from exc
    return parse_pvgis_json(doc, lat, lon, tz_offset_h, error=ExternalServiceError)


def parse_pvgis_json(doc, lat, lon, tz_offset_h=3.0, error=InputDataError) -> WeatherSeries:
    """Weather series from a PVGIS ``seriescalc`` JSON document (``components=1``).

    Beam normal irradiance is recovered from the horizontal beam component
    and the sun height reported by the service.
    """
    try:
        hourly = doc["outputs"]["hourly"]
        times = np.array([_parse_time(r["time"]) for r in hourly])
        gb = np.array([float(r["Gb(i)"]) for r in hourly])
        gd = np.array([float(r["Gd(i)"]) for r in hourly])
        h_sun = np.array([float(r["H_sun"]) for r in hourly])
        t2m = np.array([float(r["T2m"]) for r in hourly])
        ws = np.array([float(r["WS10m"]) for r in hourly])
    except (KeyError, TypeError, ValueError, InputDataError) as exc:
        raise error(f"unexpected PVGIS payload: {exc!r}") from exc
    s = np.sin(np.radians(h_sun))
    dni = np.where(h_sun > 1.0, gb / np.where(s > 0, s, 1.0), 0.0)
    return WeatherSeries(times=times, ghi=gb + gd, dni=dni, dhi=gd, t_amb=t2m, wind=ws,
                         lat=float(lat), lon=float(lon), tz_offset_h=tz_offset_h)


def read_weather(path, lat, lon, tz_offset_h=3.0, check=True) -> WeatherSeries:
    """Weather from a CSV in the package layout or a saved PVGIS JSON response."""
    if str(path).lower().endswith(".json"):
        import json
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except ValueError as exc:
                raise InputDataError(f"{path}: invalid JSON ({exc})") from exc
        w = parse_pvgis_json(doc, lat, lon, tz_offset_h)
        if check:
            check_consistency(w)
        return w
    return read_weather_csv(path, lat, lon, tz_offset_h, check)
