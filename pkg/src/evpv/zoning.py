"""Regular traffic-zone grid, geodata aggregation and EV allocation.

Zones are square cells of a fixed side length laid out in a local
equirectangular frame centred on the study boundary. Row 0 is the northern
row; zone ids run row-major over the cells that are kept.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon, shape

from .errors import InputDataError

EARTH_RADIUS_KM = 6371.0088
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class LocalFrame:
    """Equirectangular projection about ``(lon0, lat0)``; x east, y north, km."""

    lon0: float
    lat0: float

    @property
    def _kx(self):
        return EARTH_RADIUS_KM * math.radians(1.0) * math.cos(math.radians(self.lat0))

    @property
    def _ky(self):
        return EARTH_RADIUS_KM * math.radians(1.0)

    def project(self, lon, lat):
        lon = np.asarray(lon, dtype=float)
        lat = np.asarray(lat, dtype=float)
        return (lon - self.lon0) * self._kx, (lat - self.lat0) * self._ky

    def unproject(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.lon0 + x / self._kx, self.lat0 + y / self._ky


@dataclass(frozen=True)
class BoundaryPolygon:
    """Study-area boundary in lon/lat degrees.

    ``parts`` holds one ``(exterior, holes)`` pair per polygon so that
    GeoJSON MultiPolygons survive the round trip.
    """

    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise InputDataError("boundary has no polygon parts")
        for exterior, holes in self.parts:
            for ring in (exterior, *holes):
                if len(ring) < 4:
                    raise InputDataError("boundary ring needs at least 4 vertices")
                if tuple(ring[0]) != tuple(ring[-1]):
                    raise InputDataError("boundary ring is not closed")
                if not np.all(np.isfinite(np.asarray(ring, dtype=float))):
                    raise InputDataError("boundary has non-finite coordinates")
        if not self.geometry.is_valid:
            raise InputDataError("boundary polygon is self-intersecting or otherwise invalid")

    @classmethod
    def from_rings(cls, exterior, holes=()):
        return cls(((tuple(map(tuple, exterior)), tuple(tuple(map(tuple, h)) for h in holes)),))

    @classmethod
    def from_geojson(cls, obj) -> "BoundaryPolygon":
        """Accept a geometry, Feature or FeatureCollection (Polygon/MultiPolygon)."""
        if obj.get("type") == "FeatureCollection":
            geoms = [shape(f["geometry"]) for f in obj["features"]]
            geom = shapely.union_all(geoms)
        elif obj.get("type") == "Feature":
            geom = shape(obj["geometry"])
        else:
            geom = shape(obj)
        return cls.from_shapely(geom)

    @classmethod
    def from_shapely(cls, geom) -> "BoundaryPolygon":
        polys = list(geom.geoms) if isinstance(geom, MultiPolygon) else [geom]
        parts = []
        for p in polys:
            if not isinstance(p, Polygon):
                raise InputDataError(f"unsupported boundary geometry {p.geom_type}")
            parts.append((tuple(p.exterior.coords), tuple(tuple(r.coords) for r in p.interiors)))
        return cls(tuple(parts))

    @property
    def geometry(self):
        polys = [Polygon(ext, holes) for ext, holes in self.parts]
        return polys[0] if len(polys) == 1 else MultiPolygon(polys)

    def projected(self, frame: LocalFrame):
        polys = []
        for ext, holes in self.parts:
            rings = []
            for ring in (ext, *holes):
                a = np.asarray(ring, dtype=float)
                x, y = frame.project(a[:, 0], a[:, 1])
                rings.append(np.column_stack([x, y]))
            polys.append(Polygon(rings[0], rings[1:]))
        return polys[0] if len(polys) == 1 else MultiPolygon(polys)


@dataclass
class PopulationRaster:
    """Gridded person counts.

    ``origin`` is the lower-left corner (lon, lat) and ``cell_size`` is in
    degrees. Row 0 of ``counts`` is the northern row (ESRI ASCII order).
    """

    origin: tuple
    cell_size: float
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.ndim != 2:
            raise InputDataError("population raster must be 2-D")
        if not np.all(np.isfinite(self.counts)) or np.any(self.counts < 0):
            raise InputDataError("population counts must be finite and non-negative")
        if self.cell_size <= 0:
            raise InputDataError("raster cell size must be positive")

    def centers(self):
        nrows, ncols = self.counts.shape
        lon = self.origin[0] + (np.arange(ncols) + 0.5) * self.cell_size
        lat = self.origin[1] + (nrows - np.arange(nrows) - 0.5) * self.cell_size
        lon_g, lat_g = np.meshgrid(lon, lat)
        return lon_g.ravel(), lat_g.ravel(), self.counts.ravel()


@dataclass
class PopulationPoints:
    """Population given as (lon, lat, count) records, e.g. from CSV."""

    lon: np.ndarray
    lat: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        self.lon = np.asarray(self.lon, dtype=float)
        self.lat = np.asarray(self.lat, dtype=float)
        self.count = np.asarray(self.count, dtype=float)
        if not np.all(np.isfinite(self.count)) or np.any(self.count < 0):
            raise InputDataError("population counts must be finite and non-negative")

    def centers(self):
        return self.lon, self.lat, self.count


@dataclass
class PointSet:
    kind: str  # "workplace" or "poi"
    lon: np.ndarray
    lat: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("workplace", "poi"):
            raise InputDataError(f"unknown point kind {self.kind!r}")
        self.lon = np.asarray(self.lon, dtype=float).reshape(-1)
        self.lat = np.asarray(self.lat, dtype=float).reshape(-1)
        if self.lon.shape != self.lat.shape:
            raise InputDataError("lon/lat length mismatch")
        if not (np.all(np.isfinite(self.lon)) and np.all(np.isfinite(self.lat))):
            raise InputDataError(f"{self.kind} points contain non-finite coordinates")

    def __len__(self):
        return self.lon.size


@dataclass(frozen=True)
class TrafficZone:
    id: int
    row: int
    col: int
    centroid: tuple
    polygon: tuple
    population: float = 0.0
    workplaces: int = 0
    pois: int = 0
    n_ev: int = 0


@dataclass
class ZoneGrid:
    """Kept cells of the regular grid plus per-zone attribute arrays."""

    cell_size_km: float
    frame: LocalFrame
    x0: float  # west edge of column 0, km
    ytop: float  # north edge of row 0, km
    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    population: np.ndarray
    workplaces: np.ndarray
    pois: np.ndarray
    n_ev: np.ndarray
    unassigned: dict = field(default_factory=dict)

    @property
    def n_zones(self) -> int:
        return int(self.rows.size)

    @property
    def cell_area_km2(self) -> float:
        return self.cell_size_km ** 2

    @property
    def P_tot(self) -> float:
        return float(self.population.sum())

    @property
    def m_tot(self) -> int:
        return int(self.pois.sum())

    @property
    def n_tot(self) -> int:
        return int(self.n_ev.sum())

    def centroids_xy(self):
        s = self.cell_size_km
        return self.x0 + (self.cols + 0.5) * s, self.ytop - (self.rows + 0.5) * s

    def centroids_lonlat(self):
        return self.frame.unproject(*self.centroids_xy())

    def cell_polygon_xy(self, i):
        s = self.cell_size_km
        xw = self.x0 + self.cols[i] * s
        yn = self.ytop - self.rows[i] * s
        return [(xw, yn - s), (xw + s, yn - s), (xw + s, yn), (xw, yn), (xw, yn - s)]

    def cell_polygon_lonlat(self, i):
        xy = np.asarray(self.cell_polygon_xy(i))
        lon, lat = self.frame.unproject(xy[:, 0], xy[:, 1])
        return tuple(zip(lon.tolist(), lat.tolist()))

    @property
    def zones(self) -> list[TrafficZone]:
        lon, lat = self.centroids_lonlat()
        return [
            TrafficZone(
                id=i, row=int(self.rows[i]), col=int(self.cols[i]),
                centroid=(float(lon[i]), float(lat[i])),
                polygon=self.cell_polygon_lonlat(i),
                population=float(self.population[i]),
                workplaces=int(self.workplaces[i]), pois=int(self.pois[i]),
                n_ev=int(self.n_ev[i]),
            )
            for i in range(self.n_zones)
        ]

    def _id_lookup(self):
        table = np.full((self.nrows, self.ncols), -1, dtype=np.int64)
        table[self.rows, self.cols] = np.arange(self.n_zones)
        return table

    def locate_xy(self, x, y) -> np.ndarray:
        """Zone id for each projected point, -1 outside every zone.

        Cells are closed squares; a point on a shared edge or corner goes to
        the lowest id among the cells touching it.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self.cell_size_km
        u = (x - self.x0) / s
        v = (self.ytop - y) / s
        table = self._id_lookup()
        best = np.full(x.shape, np.iinfo(np.int64).max, dtype=np.int64)
        for r in _edge_candidates(v):
            for c in _edge_candidates(u):
                ok = (r >= 0) & (r < self.nrows) & (c >= 0) & (c < self.ncols)
                ids = np.full(x.shape, -1, dtype=np.int64)
                ids[ok] = table[r[ok], c[ok]]
                hit = ids >= 0
                best[hit] = np.minimum(best[hit], ids[hit])
        best[best == np.iinfo(np.int64).max] = -1
        return best

    def locate(self, lon, lat) -> np.ndarray:
        return self.locate_xy(*self.frame.project(lon, lat))

    def to_geojson(self) -> dict:
        feats = []
        for z in self.zones:
            feats.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [list(map(list, z.polygon))]},
                "properties": {
                    "id": z.id, "population": z.population, "workplaces": z.workplaces,
                    "pois": z.pois, "n_ev": z.n_ev,
                },
            })
        return {"type": "FeatureCollection", "features": feats}


def _edge_candidates(u):
    """Lower/upper cell index along one axis; they differ only on an edge."""
    r = np.rint(u)
    on_edge = np.abs(u - r) < _EDGE_EPS
    hi = np.where(on_edge, r, np.floor(u)).astype(np.int64)
    lo = np.where(on_edge, r - 1, hi).astype(np.int64)
    return lo, hi


def build_zone_grid(boundary: BoundaryPolygon, cell_size_km: float) -> ZoneGrid:
    """Tile the boundary with square cells and keep those whose centroid is inside.

    The grid is centred on the boundary's bounding box. If no centroid falls
    inside (boundary smaller than a cell) the single cell holding the
    boundary's representative point is kept.
    """
    if not cell_size_km > 0:
        raise InputDataError("cell size must be positive")
    c = boundary.geometry.centroid
    frame = LocalFrame(float(c.x), float(c.y))
    poly = boundary.projected(frame)
    if poly.area < 1e-9:
        raise InputDataError("degenerate boundary (zero area)")

    s = float(cell_size_km)
    minx, miny, maxx, maxy = poly.bounds
    ncols = max(1, math.ceil((maxx - minx) / s - 1e-9))
    nrows = max(1, math.ceil((maxy - miny) / s - 1e-9))
    x0 = 0.5 * (minx + maxx) - 0.5 * ncols * s
    ytop = 0.5 * (miny + maxy) + 0.5 * nrows * s

    rr, cc = np.meshgrid(np.arange(nrows), np.arange(ncols), indexing="ij")
    rr, cc = rr.ravel(), cc.ravel()
    cx = x0 + (cc + 0.5) * s
    cy = ytop - (rr + 0.5) * s
    inside = shapely.contains_xy(poly, cx, cy)
    if not inside.any():
        p = poly.representative_point()
        inside = (cc == min(int((p.x - x0) // s), ncols - 1)) & (rr == min(int((ytop - p.y) // s), nrows - 1))

    n = int(inside.sum())
    return ZoneGrid(
        cell_size_km=s, frame=frame, x0=x0, ytop=ytop, nrows=nrows, ncols=ncols,
        rows=rr[inside], cols=cc[inside],
        population=np.zeros(n), workplaces=np.zeros(n, dtype=np.int64),
        pois=np.zeros(n, dtype=np.int64), n_ev=np.zeros(n, dtype=np.int64),
    )


def aggregate_population(grid: ZoneGrid, raster) -> ZoneGrid:
    """Assign each raster cell's count to the zone containing its centre."""
    lon, lat, count = raster.centers()
    ids = grid.locate(lon, lat)
    hit = ids >= 0
    if not np.any(hit & (count > 0)):
        raise InputDataError("no population coverage")
    pop = np.bincount(ids[hit], weights=count[hit], minlength=grid.n_zones)
    unassigned = dict(grid.unassigned, population=float(count[~hit].sum()))
    return replace(grid, population=pop, unassigned=unassigned)


def aggregate_points(grid: ZoneGrid, points: PointSet) -> ZoneGrid:
    """Count workplaces or POIs per zone; points outside all zones are only tallied."""
    ids = grid.locate(points.lon, points.lat) if len(points) else np.zeros(0, dtype=np.int64)
    hit = ids >= 0
    counts = np.bincount(ids[hit], minlength=grid.n_zones).astype(np.int64)
    key = "workplaces" if points.kind == "workplace" else "pois"
    unassigned = dict(grid.unassigned, **{key: int((~hit).sum())})
    return replace(grid, **{key: counts}, unassigned=unassigned)


def largest_remainder(weights, total: int) -> np.ndarray:
    """Hamilton apportionment of ``total`` units proportionally to ``weights``.

    Remainder ties go to the larger weight, then to the lower index.
    """
    w = np.asarray(weights, dtype=float)
    wsum = w.sum()
    if not wsum > 0:
        raise InputDataError("cannot apportion over zero total weight")
    quota = w * total / wsum
    base = np.floor(quota).astype(np.int64)
    left = int(total - base.sum())
    frac = quota - base
    order = np.lexsort((np.arange(w.size), -w, -frac))
    base[order[:left]] += 1
    return base


def allocate_vehicles(grid: ZoneGrid, n_tot: int) -> ZoneGrid:
    if n_tot < 0:
        raise InputDataError("n_tot must be non-negative")
    if not grid.P_tot > 0:
        raise InputDataError("total population is zero; cannot allocate vehicles")
    return replace(grid, n_ev=largest_remainder(grid.population, int(n_tot)))


# --- file readers / writers -------------------------------------------------

def read_boundary(path) -> BoundaryPolygon:
    with open(path) as fh:
        return BoundaryPolygon.from_geojson(json.load(fh))


def read_esri_ascii(path) -> PopulationRaster:
    header = {}
    with open(path) as fh:
        while True:
            pos = fh.tell()
            line = fh.readline()
            key, _, val = line.strip().partition(" ")
            if key.lower() in ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter",
                               "yllcenter", "cellsize", "nodata_value"):
                header[key.lower()] = float(val)
            else:
                fh.seek(pos)
                break
        data = np.loadtxt(fh, ndmin=2)
    size = header["cellsize"]
    if "xllcorner" in header:
        origin = (header["xllcorner"], header["yllcorner"])
    else:
        origin = (header["xllcenter"] - size / 2, header["yllcenter"] - size / 2)
    if data.shape != (int(header["nrows"]), int(header["ncols"])):
        raise InputDataError(f"{path}: grid shape {data.shape} disagrees with header")
    if "nodata_value" in header:
        data[data == header["nodata_value"]] = 0.0
    return PopulationRaster(origin=origin, cell_size=size, counts=data)


def write_esri_ascii(path, raster: PopulationRaster, fmt="%.3f"):
    nrows, ncols = raster.counts.shape
    with open(path, "w") as fh:
        fh.write(f"ncols {ncols}\nnrows {nrows}\nxllcorner {raster.origin[0]!r}\n"
                 f"yllcorner {raster.origin[1]!r}\ncellsize {raster.cell_size!r}\nNODATA_value -9999\n")
        np.savetxt(fh, raster.counts, fmt=fmt)


def read_population(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        lon, lat, cnt = [], [], []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                lon.append(float(rec["lon"]))
                lat.append(float(rec["lat"]))
                cnt.append(float(rec["count"]))
        return PopulationPoints(lon, lat, cnt)
    return read_esri_ascii(path)


def read_points(path, kind) -> PointSet:
    path = Path(path)
    if path.suffix.lower() in (".geojson", ".json"):
        with open(path) as fh:
            obj = json.load(fh)
        lon, lat, labels = [], [], []
        for f in obj["features"]:
            g = f["geometry"]
            if g["type"] != "Point":
                continue
            lon.append(g["coordinates"][0])
            lat.append(g["coordinates"][1])
            labels.append((f.get("properties") or {}).get("name", ""))
        return PointSet(kind, lon, lat, labels)
    lon, lat, labels = [], [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            lon.append(float(rec["lon"]))
            lat.append(float(rec["lat"]))
            labels.append(rec.get("name", "") or "")
    return PointSet(kind, lon, lat, labels)


def write_zones_geojson(path, grid: ZoneGrid):
    with open(path, "w") as fh:
        json.dump(grid.to_geojson(), fh, indent=1)
