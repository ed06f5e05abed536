"""Independent reference implementations used only by the tests.

Written from textbook definitions with plain loops, sharing no code with
the package.
"""
import math


def ray_cast_inside(x, y, ring):
    """Even-odd point-in-polygon test for a closed ring [(x, y), ...]."""
    inside = False
    n = len(ring) - 1
    for k in range(n):
        x1, y1 = ring[k]
        x2, y2 = ring[k + 1]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def gravity_brute_force(attract, dist, beta):
    """p[i][j] = A_j exp(-beta d_ij) / sum_k A_k exp(-beta d_ik), plain loops."""
    n = len(attract)
    p = [[0.0] * n for _ in range(n)]
    for i in range(n):
        den = math.fsum(attract[k] * math.exp(-beta * dist[i][k]) for k in range(n))
        for j in range(n):
            p[i][j] = attract[j] * math.exp(-beta * dist[i][j]) / den
    return p


def pl_value(xs, ys, t):
    for k in range(len(xs) - 1):
        if xs[k] <= t <= xs[k + 1]:
            if xs[k + 1] == xs[k]:
                return ys[k + 1]
            return ys[k] + (ys[k + 1] - ys[k]) * (t - xs[k]) / (xs[k + 1] - xs[k])
    return 0.0


def pl_min_integral(f, g, a, b):
    """Exact integral of min(f, g) over [a, b] for piecewise-linear f, g.

    ``f`` and ``g`` are (xs, ys) breakpoint lists, zero outside their support.
    Splits at all breakpoints and crossings, then integrates trapezoids.
    """
    cuts = sorted({a, b, *[x for x in f[0] + g[0] if a < x < b]})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        d0 = pl_value(*f, lo) - pl_value(*g, lo)
        d1 = pl_value(*f, hi) - pl_value(*g, hi)
        pts = [lo, hi]
        if d0 * d1 < 0:
            pts = [lo, lo + (hi - lo) * d0 / (d0 - d1), hi]
        for u, v in zip(pts[:-1], pts[1:]):
            m = 0.5 * (u + v)
            # on a crossing-free piece the lower function is linear
            lower = f if pl_value(*f, m) <= pl_value(*g, m) else g
            total += 0.5 * (pl_value(*lower, u) + pl_value(*lower, v)) * (v - u)
    return total


def michalsky_position(year, month, day, hour_utc, lat, lon):
    """Geometric solar zenith and azimuth (deg) from the Astronomical Almanac
    low-precision formulas (Michalsky 1988), with the standard GMST series.
    """
    # Julian day (Fliegel-Van Flandern for the date, plus fraction of day)
    a = (14 - month) // 12
    y = year + 4800 - a
    m = month + 12 * a - 3
    jdn = day + (153 * m + 2) // 5 + 365 * y + y // 4 - y // 100 + y // 400 - 32045
    jd = jdn - 0.5 + hour_utc / 24.0
    n = jd - 2451545.0
    L = (280.460 + 0.9856474 * n) % 360
    g = math.radians((357.528 + 0.9856003 * n) % 360)
    lam = math.radians(L + 1.915 * math.sin(g) + 0.020 * math.sin(2 * g))
    eps = math.radians(23.439 - 0.0000004 * n)
    ra = math.atan2(math.cos(eps) * math.sin(lam), math.cos(lam))
    dec = math.asin(math.sin(eps) * math.sin(lam))
    gmst_h = (18.697374558 + 24.06570982441908 * n) % 24
    lmst = math.radians((gmst_h * 15 + lon) % 360)
    ha = (lmst - ra + math.pi) % (2 * math.pi) - math.pi
    phi = math.radians(lat)
    el = math.asin(math.sin(dec) * math.sin(phi) + math.cos(dec) * math.cos(phi) * math.cos(ha))
    az = math.atan2(-math.sin(ha), math.tan(dec) * math.cos(phi) - math.sin(phi) * math.cos(ha))
    return 90.0 - math.degrees(el), math.degrees(az) % 360
