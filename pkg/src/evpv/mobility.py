"""Inter-zone distances, gravity trip distribution and vehicle-kilometres."""
from __future__ import annotations

import csv
import hashlib
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import shapely

from .errors import ExternalServiceError, InputDataError
from .rng import stream
from .zoning import BoundaryPolygon, LocalFrame, ZoneGrid

log = logging.getLogger(__name__)

INTRA, ROUTED, CIRCUITY = 0, 1, 2


class DistanceProvider(ABC):
    """Road-distance source. Coordinates are (lon, lat) rows; results in km.

    Unroutable entries come back as NaN. A provider that is down entirely
    raises :class:`ExternalServiceError`.
    """

    @abstractmethod
    def matrix(self, sources, targets) -> np.ndarray:
        ...

    def pairs(self, a, b, batch: int = 25) -> np.ndarray:
        """Distance from ``a[k]`` to ``b[k]`` for every k."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = np.full(len(a), np.nan)
        for start in range(0, len(a), batch):
            sl = slice(start, start + batch)
            out[sl] = np.diagonal(self.matrix(a[sl], b[sl]))
        return out


@dataclass(frozen=True)
class CircuityModel:
    factor: float
    n_samples: int = 0
    residual: float = 0.0

    def __post_init__(self):
        if not self.factor >= 1.0:
            raise InputDataError("circuity factor must be >= 1")


@dataclass
class DistanceMatrix:
    d: np.ndarray  # km
    source: np.ndarray  # INTRA / ROUTED / CIRCUITY per entry

    def __post_init__(self):
        if not np.all(np.isfinite(self.d)) or np.any(self.d < 0):
            raise InputDataError("distance matrix must be finite and non-negative")


@dataclass
class TripMatrix:
    p: np.ndarray
    beta: float
    c: np.ndarray


@dataclass
class MobilityResult:
    vkm_out: np.ndarray  # km/day per zone
    vkm_in: np.ndarray
    two_way_km: np.ndarray  # [i, j] daily distance of a vehicle from i commuting to j
    weights: np.ndarray  # [i, j] probability of that destination
    mean_daily_km: float


def compute_beta(cell_area_km2: float) -> float:
    """Self-calibrated exponential decay rate (1/km) for zones of the given area."""
    if not cell_area_km2 > 0:
        raise InputDataError("zone area must be positive")
    return 0.3 * cell_area_km2 ** -0.18


def intra_zonal_distance(cell_area_km2: float) -> float:
    """Half the radius of the circle with the zone's area."""
    return 0.5 * np.sqrt(cell_area_km2 / np.pi)


def sample_points_in(poly, n, rng):
    """Uniform points inside a projected shapely polygon (rejection sampling)."""
    minx, miny, maxx, maxy = poly.bounds
    out = np.empty((0, 2))
    while len(out) < n:
        k = max(64, 2 * (n - len(out)))
        cand = np.column_stack([rng.uniform(minx, maxx, k), rng.uniform(miny, maxy, k)])
        out = np.vstack([out, cand[shapely.contains_xy(poly, cand[:, 0], cand[:, 1])]])
    return out[:n]


def estimate_circuity(boundary: BoundaryPolygon, router: DistanceProvider, n_samples: int = 100,
                      seed: int = 0) -> CircuityModel:
    """Fit road = k * euclid through the origin over random point pairs."""
    if n_samples < 10:
        raise InputDataError("circuity estimation needs at least 10 samples")
    c = boundary.geometry.centroid
    frame = LocalFrame(float(c.x), float(c.y))
    poly = boundary.projected(frame)
    rng = stream(seed, "circuity")
    xy_a = sample_points_in(poly, n_samples, rng)
    xy_b = sample_points_in(poly, n_samples, rng)
    euclid = np.hypot(*(xy_a - xy_b).T)
    a = np.column_stack(frame.unproject(xy_a[:, 0], xy_a[:, 1]))
    b = np.column_stack(frame.unproject(xy_b[:, 0], xy_b[:, 1]))
    road = np.asarray(router.pairs(a, b), dtype=float)

    ok = np.isfinite(road)
    if ok.sum() < 0.5 * n_samples:
        raise ExternalServiceError(f"routing failed for {n_samples - ok.sum()} of {n_samples} samples")
    e, r = euclid[ok], road[ok]
    denom = np.dot(e, e)
    if denom <= 0:
        raise InputDataError("all sampled points coincide; circuity undefined")
    k = float(np.dot(e, r) / denom)
    resid = float(np.sqrt(np.mean((r - k * e) ** 2)))
    return CircuityModel(factor=max(1.0, k), n_samples=int(ok.sum()), residual=resid)


def euclidean_matrix(grid: ZoneGrid) -> np.ndarray:
    x, y = grid.centroids_xy()
    return np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])


def distance_matrix(grid: ZoneGrid, router: DistanceProvider | None, circuity: CircuityModel) -> DistanceMatrix:
    """Centroid-to-centroid road distances with circuity fallback.

    Routed entries are used where available; everything else is
    ``circuity.factor * euclidean``. The diagonal holds the intra-zonal
    distance.
    """
    n = grid.n_zones
    if n < 1:
        raise InputDataError("grid has no zones")
    d = circuity.factor * euclidean_matrix(grid)
    source = np.full((n, n), CIRCUITY, dtype=np.int8)
    if router is not None and n > 1:
        pts = np.column_stack(grid.centroids_lonlat())
        try:
            routed = np.asarray(router.matrix(pts, pts), dtype=float)
        except ExternalServiceError as exc:
            log.warning("routing unavailable, using circuity fallback: %s", exc)
            routed = np.full((n, n), np.nan)
        ok = np.isfinite(routed) & (routed >= 0)
        d[ok] = routed[ok]
        source[ok] = ROUTED
    np.fill_diagonal(d, intra_zonal_distance(grid.cell_area_km2))
    np.fill_diagonal(source, INTRA)
    return DistanceMatrix(d=d, source=source)


def trip_probabilities(grid: ZoneGrid, D: DistanceMatrix, beta: float) -> TripMatrix:
    """Production-constrained gravity model with workplaces as attractiveness.

    Every row is normalised over all destinations, the origin itself
    included.
    """
    A = np.asarray(grid.workplaces, dtype=float)
    if not A.sum() > 0:
        raise InputDataError("no destinations: all zone attractiveness is zero")
    if not beta > 0:
        raise InputDataError("beta must be positive")
    # shifting each row by its min distance cancels in the normalisation
    shift = D.d.min(axis=1, keepdims=True)
    w = A[None, :] * np.exp(-beta * (D.d - shift))
    row = w.sum(axis=1)
    p = w / row[:, None]
    c = np.exp(beta * shift[:, 0]) / row
    return TripMatrix(p=p, beta=float(beta), c=c)


def vkm(grid: ZoneGrid, T: TripMatrix, D: DistanceMatrix, extra_km: float = 0.0) -> MobilityResult:
    """Daily vehicle-kilometres per origin and destination zone.

    ``extra_km`` is a per-vehicle daily distance for non-commuting trips;
    it is driven around the home zone and so counts in both VKM_out and
    VKM_in of that zone.
    """
    n = np.asarray(grid.n_ev, dtype=float)
    flows = T.p * n[:, None]  # vehicles i -> j
    off = ~np.eye(grid.n_zones, dtype=bool)
    km = np.where(off, flows * D.d, 0.0)
    vkm_out = 2.0 * km.sum(axis=1) + n * extra_km
    vkm_in = 2.0 * km.sum(axis=0) + n * extra_km
    two_way = 2.0 * D.d + extra_km
    n_tot = n.sum()
    mean = float((flows * two_way).sum() / n_tot) if n_tot > 0 else 0.0
    return MobilityResult(vkm_out=vkm_out, vkm_in=vkm_in, two_way_km=two_way,
                          weights=T.p, mean_daily_km=mean)


# --- caching ------------------------------------------------------------------

def grid_hash(grid: ZoneGrid) -> str:
    h = hashlib.sha256()
    h.update(repr((grid.cell_size_km, grid.frame.lon0, grid.frame.lat0, grid.x0, grid.ytop,
                   grid.nrows, grid.ncols)).encode())
    h.update(np.ascontiguousarray(grid.rows, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(grid.cols, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


def write_distance_csv(path, D: DistanceMatrix):
    names = {INTRA: "intra", ROUTED: "routed", CIRCUITY: "circuity"}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["origin", "destination", "km", "source"])
        n = D.d.shape[0]
        for i in range(n):
            for j in range(n):
                w.writerow([i, j, repr(float(D.d[i, j])), names[int(D.source[i, j])]])


def read_distance_csv(path) -> DistanceMatrix:
    codes = {"intra": INTRA, "routed": ROUTED, "circuity": CIRCUITY}
    rows = list(csv.DictReader(open(path, newline="")))
    n = int(round(len(rows) ** 0.5))
    d = np.zeros((n, n))
    src = np.zeros((n, n), dtype=np.int8)
    for r in rows:
        i, j = int(r["origin"]), int(r["destination"])
        d[i, j] = float(r["km"])
        src[i, j] = codes[r["source"]]
    return DistanceMatrix(d=d, source=src)


def cached_distance_matrix(grid, router, circuity, cache_dir) -> DistanceMatrix:
    """Distance matrix read from / written to ``cache_dir`` keyed by grid hash."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{grid_hash(grid)}_{'routed' if router else 'c'}{circuity.factor:.6f}"
    path = cache_dir / f"distances_{tag}.csv"
    if path.exists():
        return read_distance_csv(path)
    D = distance_matrix(grid, router, circuity)
    write_distance_csv(path, D)
    return D
