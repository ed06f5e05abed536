"""Generate the bundled synthetic Addis Ababa-like sample inputs.

The layers are synthetic but shaped like the real case study: a ~540 km2
boundary, 5.54 million residents, 1845 workplaces and 3633 POIs clustered
around a central business district, an hourly 2020 weather year and a
national 24 h load curve. Output goes to src/evpv/data/.

    python scripts/make_sample_inputs.py
"""
import argparse
import csv
import json
import math
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Polygon

from evpv.zoning import LocalFrame, PopulationRaster, write_esri_ascii

CENTER = (38.757, 9.010)
AREA_KM2 = 540.0
N_POP = 5.54e6
N_WORK = 1845
N_POI = 3633
CBD_KM = (-0.6, -0.8)  # business district offset from the centre


def boundary_xy():
    th = np.linspace(0, 2 * np.pi, 97)[:-1]
    r = 1 + 0.16 * np.sin(2 * th + 1.0) + 0.09 * np.cos(3 * th - 0.4) + 0.05 * np.sin(5 * th)
    poly = Polygon(np.column_stack([np.cos(th) * r, np.sin(th) * r * 1.1]))
    k = math.sqrt(AREA_KM2 / poly.area)
    return shapely.affinity.scale(poly, k, k, origin=(0, 0))


def population(poly, frame, rng, cell_deg=0.0025):
    minx, miny, maxx, maxy = poly.bounds
    lon0, lat0 = frame.unproject(minx - 1, miny - 1)
    lon1, lat1 = frame.unproject(maxx + 1, maxy + 1)
    ncols = int(np.ceil((lon1 - lon0) / cell_deg))
    nrows = int(np.ceil((lat1 - lat0) / cell_deg))
    lon = lon0 + (np.arange(ncols) + 0.5) * cell_deg
    lat = lat0 + (nrows - np.arange(nrows) - 0.5) * cell_deg
    LON, LAT = np.meshgrid(lon, lat)
    x, y = frame.project(LON, LAT)
    r_core = np.hypot(x - 0.5, y + 0.3)
    dens = 0.40 * np.exp(-r_core / 4.5) + 0.60 * np.exp(-r_core / 11.0)
    for cx, cy, w in [(7.0, -4.0, 0.35), (-8.0, 3.0, 0.3), (3.0, 9.0, 0.25), (-4.0, -9.0, 0.3)]:
        dens += w * np.exp(-np.hypot(x - cx, y - cy) ** 2 / (2 * 2.2 ** 2))
    dens *= rng.lognormal(0.0, 0.5, dens.shape)
    dens[~shapely.contains_xy(poly, x, y)] = 0.0
    counts = dens * N_POP / dens.sum()
    return PopulationRaster(origin=(float(lon0), float(lat0)), cell_size=cell_deg, counts=counts)


def clustered_points(poly, n, rng, core_sd, core_frac, sub_sd):
    subs = [(7.0, -4.0), (-8.0, 3.0), (3.0, 9.0), (-4.0, -9.0), (9.0, 5.0)]
    pts = []
    while len(pts) < n:
        if rng.random() < core_frac:
            p = rng.normal(CBD_KM, core_sd)
        else:
            c = subs[rng.integers(len(subs))]
            p = rng.normal(c, sub_sd)
        if poly.contains(shapely.Point(p)):
            pts.append(p)
    return np.array(pts)


def write_points(path, frame, xy, prefix):
    lon, lat = frame.unproject(xy[:, 0], xy[:, 1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lon", "lat", "name"])
        for k, (a, b) in enumerate(zip(lon, lat)):
            w.writerow([f"{a:.6f}", f"{b:.6f}", f"{prefix}{k}"])


# --- weather ------------------------------------------------------------------

def weather_year(rng, lat=9.01, lon=38.757, year=2020):
    """Hourly clear-sky irradiance with a rainy season (Jul-Sep) cloud regime."""
    from evpv.pv.solar import solar_position

    times = np.arange(np.datetime64(f"{year}-01-01T00:10"), np.datetime64(f"{year + 1}-01-01T00:10"),
                      np.timedelta64(1, "h"))
    zen, _ = solar_position(times, lat, lon)
    doy = (times.astype("datetime64[D]") - np.datetime64(f"{year}-01-01")).astype(int)
    cosz = np.clip(np.cos(np.radians(zen)), 0, None)
    e0 = 1367.0 * (1 + 0.033 * np.cos(2 * np.pi * doy / 365.0))
    am = 1.0 / (cosz + 0.50572 * np.clip(96.07995 - zen, 1e-3, None) ** -1.6364)
    dni_clear = np.where(cosz > 0, e0 * 0.70 ** (am ** 0.678) * 1.06, 0.0)
    dhi_clear = np.where(cosz > 0, 0.12 * e0 * cosz, 0.0)
    month = (times.astype("datetime64[M]").astype(int) % 12) + 1
    # daily cloudiness: heavy in Jul-Sep, moderate in Jun and Mar-May, light otherwise
    cloud_mean = np.select([np.isin(month, [7, 8]), np.isin(month, [6, 9]), np.isin(month, [3, 4, 5])],
                           [0.62, 0.45, 0.32], 0.16)
    day_cloud = rng.beta(2.0, 2.0, 366)
    hour = (times.astype("datetime64[h]").astype(int) + 3) % 24
    afternoon = np.clip((hour - 12) / 6.0, 0, 1)  # convective build-up after noon
    c = np.clip(cloud_mean * (0.5 + day_cloud[doy]) * (1 + 0.6 * afternoon) + rng.normal(0, 0.08, times.size), 0, 0.97)
    dni = dni_clear * (1 - c) ** 1.4
    dhi = dhi_clear * (1 + 1.8 * c) * (1 - 0.5 * c ** 2)
    ghi = dni * cosz + dhi
    t_amb = (16.5 + 5.5 * np.sin(2 * np.pi * (hour - 9) / 24.0) - 2.0 * np.isin(month, [7, 8, 9])
             + rng.normal(0, 0.8, times.size))
    wind = np.clip(rng.gamma(3.0, 0.8, times.size), 0, None)
    return times, ghi, dni, dhi, t_amb, wind


def write_weather(path, rng):
    times, ghi, dni, dhi, t, ws = weather_year(rng)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "G(h)", "Gb(n)", "Gd(h)", "T2m", "WS10m"])
        for k in range(times.size):
            w.writerow([str(times[k]) + "Z", f"{ghi[k]:.1f}", f"{dni[k]:.1f}", f"{dhi[k]:.1f}",
                        f"{t[k]:.2f}", f"{ws[k]:.2f}"])


def write_national_load(path, peak_mw=4560.0, energy_mwh=80742.0):
    """Two-hump weekday curve rescaled to the stated peak and daily energy."""
    h = np.arange(24) + 0.5
    shape = (0.62 + 0.18 * np.exp(-((h - 11.0) / 3.2) ** 2) + 0.38 * np.exp(-((h - 19.5) / 1.7) ** 2)
             - 0.10 * np.exp(-((h - 3.5) / 2.5) ** 2))
    # affine map a + b*shape hitting both targets exactly
    b = (peak_mw - energy_mwh / 24.0) / (shape.max() - shape.mean())
    a = peak_mw - b * shape.max()
    mw = a + b * shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hour", "load_mw"])
        for k, v in enumerate(mw):
            w.writerow([k, repr(float(v))])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/evpv/data"))
    ap.add_argument("--seed", type=int, default=2020)
    ap.add_argument("--core-sd", type=float, default=1.3)
    ap.add_argument("--core-frac", type=float, default=0.9)
    ap.add_argument("--sub-sd", type=float, default=1.5)
    ap.add_argument("--only-geo", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    frame = LocalFrame(*CENTER)
    poly = boundary_xy()
    lon, lat = frame.unproject(*np.asarray(poly.exterior.coords).T)
    ring = [[round(float(a), 6), round(float(b), 6)] for a, b in zip(lon, lat)]
    ring[-1] = ring[0]
    with open(out / "boundary.geojson", "w") as fh:
        json.dump({"type": "FeatureCollection", "features": [{
            "type": "Feature", "properties": {"name": "Synthetic Addis Ababa"},
            "geometry": {"type": "Polygon", "coordinates": [ring]}}]}, fh)

    write_esri_ascii(out / "population.asc", population(poly, frame, rng), fmt="%.2f")
    write_points(out / "workplaces.csv", frame,
                 clustered_points(poly, N_WORK, rng, args.core_sd, args.core_frac, args.sub_sd), "work_")
    write_points(out / "pois.csv", frame,
                 clustered_points(poly, N_POI, rng, args.core_sd * 1.1, args.core_frac * 0.95, args.sub_sd), "poi_")
    if args.only_geo:
        return
    write_weather(out / "weather_2020.csv", np.random.default_rng(args.seed + 1))
    write_national_load(out / "national_load.csv")


if __name__ == "__main__":
    main()
