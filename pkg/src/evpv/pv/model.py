"""Module temperature, DC power per kWp and orientation optimisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .irradiance import angle_of_incidence, angular_loss, diffuse_angular_loss, effective_irradiance, poa_irradiance
from .solar import solar_position
from .weather import WeatherSeries


@dataclass(frozen=True)
class PVSystemSpec:
    """Fixed-tilt array. Azimuth clockwise from north; ``None`` = equator-facing."""
    tilt: float = 10.0
    azimuth: float | None = None
    efficiency: float = 0.22
    temp_coeff: float = -0.004  # 1/K
    losses: float = 0.14
    a_r: float = 0.16
    albedo: float = 0.2
    u_c: float = 29.0
    u_v: float = 0.0
    absorption: float = 0.9
    diffuse_iam: bool = True

    def __post_init__(self):
        if not 0 <= self.tilt <= 90:
            raise ConfigError("tilt must lie in [0, 90] deg")
        if not 0 < self.efficiency < 1:
            raise ConfigError("module efficiency must lie in (0, 1)")
        if not 0 <= self.losses < 1:
            raise ConfigError("system losses must lie in [0, 1)")
        if self.a_r <= 0 or self.u_c <= 0 or self.u_v < 0:
            raise ConfigError("invalid thermal or angular-loss parameters")

    def surface_azimuth(self, lat) -> float:
        if self.azimuth is not None:
            return float(self.azimuth)
        return 180.0 if lat >= 0 else 0.0


def cell_temperature(g_poa, t_amb, wind=0.0, efficiency=0.22, u_c=29.0, u_v=0.0, absorption=0.9):
    """PVsyst-style steady-state cell temperature (deg C)."""
    g = np.asarray(g_poa, dtype=float)
    return np.asarray(t_amb, dtype=float) + g * absorption * (1 - efficiency) / (u_c + u_v * np.asarray(wind, float))


def pv_power(g_eff, t_cell, temp_coeff=-0.004, losses=0.14):
    """DC output per kWp (kW/kWp), never negative."""
    p = np.asarray(g_eff, float) / 1000.0 * (1 + temp_coeff * (np.asarray(t_cell, float) - 25.0)) * (1 - losses)
    return np.maximum(p, 0.0)


@dataclass
class PVProfile:
    times: np.ndarray   # datetime64 UTC
    power: np.ndarray   # kW per kWp
    dt_h: float
    tilt: float
    azimuth: float

    @property
    def annual_yield(self) -> float:
        """Energy per kWp over the series (kWh/kWp)."""
        return float(self.power.sum() * self.dt_h)

    def daily_energy(self, tz_offset_h=0.0):
        """(local dates, kWh/kWp per day)."""
        local = self.times + np.timedelta64(int(round(tz_offset_h * 3600)), "s")
        days = local.astype("datetime64[D]")
        u, inv = np.unique(days, return_inverse=True)
        return u, np.bincount(inv, weights=self.power * self.dt_h)


def _step_hours(times) -> float:
    if len(times) < 2:
        return 1.0
    return float(np.median(np.diff(times.astype("datetime64[s]").astype("int64")))) / 3600.0


def pv_profile(weather: WeatherSeries, spec: PVSystemSpec = PVSystemSpec()) -> PVProfile:
    zen, az = solar_position(weather.times, weather.lat, weather.lon)
    sa = spec.surface_azimuth(weather.lat)
    poa = poa_irradiance(spec.tilt, sa, zen, az, weather.ghi, weather.dni, weather.dhi, spec.albedo)
    g_eff = effective_irradiance(poa, spec.tilt, spec.a_r, spec.diffuse_iam)
    tc = cell_temperature(poa.total, weather.t_amb, weather.wind, spec.efficiency, spec.u_c, spec.u_v,
                          spec.absorption)
    p = pv_power(g_eff, tc, spec.temp_coeff, spec.losses)
    return PVProfile(times=weather.times, power=p, dt_h=_step_hours(weather.times), tilt=spec.tilt, azimuth=sa)


def optimal_orientation(weather: WeatherSeries, spec: PVSystemSpec = PVSystemSpec(),
                        tilts=np.arange(0, 46, 1.0), azimuth_offsets=np.arange(-90, 91, 5.0)):
    """Grid search for the tilt/azimuth maximising annual yield.

    Azimuths are scanned around the equator-facing direction. Returns
    ``(tilt, azimuth, yield_kwh_per_kwp)``; ties keep the first grid point.
    """
    zen, az = solar_position(weather.times, weather.lat, weather.lon)
    up = zen < 90
    base = 180.0 if weather.lat >= 0 else 0.0
    azs = np.mod(base + np.asarray(azimuth_offsets, float), 360.0)
    dt = _step_hours(weather.times)
    best = (None, None, -np.inf)
    for tilt in tilts:
        aoi = angle_of_incidence(tilt, azs[:, None], zen[None, :], az[None, :])
        beam = np.where(up, weather.dni * np.maximum(np.cos(np.radians(aoi)), 0.0), 0.0)
        ct = np.cos(np.radians(tilt))
        sky = weather.dhi * (1 + ct) / 2
        gnd = weather.ghi * spec.albedo * (1 - ct) / 2
        g_eff = beam * angular_loss(aoi, spec.a_r)
        if spec.diffuse_iam:
            fs, fg = diffuse_angular_loss(tilt, spec.a_r)
            g_eff = g_eff + sky * fs + gnd * fg
        else:
            g_eff = g_eff + sky + gnd
        tc = cell_temperature(beam + sky + gnd, weather.t_amb, weather.wind, spec.efficiency, spec.u_c,
                              spec.u_v, spec.absorption)
        y = pv_power(g_eff, tc, spec.temp_coeff, spec.losses).sum(axis=1) * dt
        k = int(np.argmax(y))
        if y[k] > best[2] + 1e-9:
            best = (float(tilt), float(azs[k]), float(y[k]))
    return best
