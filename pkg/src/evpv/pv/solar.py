"""Solar position from the NOAA solar calculator equations (Meeus-based).

Valid roughly 1900-2100; apparent zenith agrees with high-accuracy
ephemerides to about 0.01 deg away from the horizon.
"""
import numpy as np


def _julian_day(times):
    t = np.asarray(times, dtype="datetime64[ns]")
    return t.astype("int64") / 86400e9 + 2440587.5


def _refraction(elevation):
    """Atmospheric refraction (deg) for a standard atmosphere, NOAA piecewise fit."""
    e = np.asarray(elevation, dtype=float)
    te = np.tan(np.radians(np.where(np.abs(e) < 1e-9, 1e-9, e)))
    r = np.where(
        e > 85, 0.0,
        np.where(
            e > 5, 58.1 / te - 0.07 / te ** 3 + 0.000086 / te ** 5,
            np.where(
                e > -0.575, 1735 + e * (-518.2 + e * (103.4 + e * (-12.79 + e * 0.711))),
                -20.774 / te,
            ),
        ),
    )
    return r / 3600.0


def solar_position(times, lat, lon, apparent=True):
    """Zenith and azimuth (deg, azimuth clockwise from north) for UTC ``times``.

    Parameters
    ----------
    times : array of numpy datetime64 (UTC)
    lat, lon : float
        Site latitude and longitude in degrees (east positive).
    apparent : bool
        Apply the standard-atmosphere refraction correction to the zenith.
    """
    jd = _julian_day(times)
    jc = (jd - 2451545.0) / 36525.0

    L0 = np.mod(280.46646 + jc * (36000.76983 + jc * 0.0003032), 360.0)
    M = 357.52911 + jc * (35999.05029 - 0.0001537 * jc)
    e = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc)
    Mr = np.radians(M)
    C = (np.sin(Mr) * (1.914602 - jc * (0.004817 + 0.000014 * jc))
         + np.sin(2 * Mr) * (0.019993 - 0.000101 * jc) + np.sin(3 * Mr) * 0.000289)
    true_long = L0 + C
    omega = np.radians(125.04 - 1934.136 * jc)
    app_long = true_long - 0.00569 - 0.00478 * np.sin(omega)
    eps0 = 23 + (26 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60) / 60
    eps = np.radians(eps0 + 0.00256 * np.cos(omega))
    decl = np.arcsin(np.sin(eps) * np.sin(np.radians(app_long)))

    y = np.tan(eps / 2) ** 2
    L0r = np.radians(L0)
    eot = 4 * np.degrees(y * np.sin(2 * L0r) - 2 * e * np.sin(Mr) + 4 * e * y * np.sin(Mr) * np.cos(2 * L0r)
                         - 0.5 * y ** 2 * np.sin(4 * L0r) - 1.25 * e ** 2 * np.sin(2 * Mr))

    minutes = np.mod((jd - 0.5) * 1440.0, 1440.0)
    tst = np.mod(minutes + eot + 4 * lon, 1440.0)
    ha = np.radians(tst / 4.0 - 180.0)

    phi = np.radians(lat)
    cosz = np.clip(np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.cos(ha), -1, 1)
    zen = np.degrees(np.arccos(cosz))
    az = np.mod(np.degrees(np.arctan2(np.sin(ha), np.cos(ha) * np.sin(phi) - np.tan(decl) * np.cos(phi))) + 180.0,
                360.0)
    if apparent:
        zen = zen - _refraction(90.0 - zen)
    return zen, az
