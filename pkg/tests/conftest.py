import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evpv import mobility as M  # noqa: E402
from evpv import spatial as S  # noqa: E402
from evpv import temporal as T  # noqa: E402
from evpv import zoning as Z  # noqa: E402
from evpv.config import bundled_path  # noqa: E402


class Case:
    """The bundled case study: grid, mobility and a 100k fleet."""

    def __init__(self, n_tot=100_000, seed=0):
        b = Z.read_boundary(bundled_path("boundary"))
        g = Z.build_zone_grid(b, 1.95)
        g = Z.aggregate_population(g, Z.read_population(bundled_path("population")))
        g = Z.aggregate_points(g, Z.read_points(bundled_path("workplaces"), "workplace"))
        g = Z.aggregate_points(g, Z.read_points(bundled_path("pois"), "poi"))
        self.boundary = b
        self.grid = Z.allocate_vehicles(g, n_tot)
        self.D = M.distance_matrix(self.grid, None, M.CircuityModel(1.3))
        self.T = M.trip_probabilities(self.grid, self.D, M.compute_beta(self.grid.cell_area_km2))
        self.mob = M.vkm(self.grid, self.T, self.D)
        self.spec = S.default_fleet()
        self.fleet = T.build_fleet(self.grid, self.mob, self.spec, seed=seed)


@pytest.fixture(scope="session")
def case():
    return Case()


@pytest.fixture(scope="session")
def small_case():
    return Case(n_tot=5_000, seed=3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, 12):
        parts = mod.VERDICTS.get(n)
        if not parts:
            tr.write_line(f"criterion {n:2d}: NOT RUN")
            continue
        scored = [ok for ok, _ in parts if ok is not None]
        state = "FAIL" if False in scored else "PASS"
        tr.write_line(f"criterion {n:2d}: {state} - " + " | ".join(d for _, d in parts))
        if n in (7, 8) and not any(d.startswith("real data") for _, d in parts):
            tr.write_line("              real-data half SKIPPED (EVPV_PVGIS_WEATHER not set)")
