import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evpv import spatial as S
from evpv.errors import ConfigError, InputDataError
from evpv.mobility import MobilityResult
from test_mobility import grid_with


def mob_of(vkm_out, vkm_in):
    n = len(vkm_out)
    return MobilityResult(np.asarray(vkm_out, float), np.asarray(vkm_in, float), np.zeros((n, n)),
                          np.eye(n), 0.0)


FLEET = S.default_fleet()


def test_home_energy_per_100_km():
    g = grid_with(1)
    d = S.spatial_demand(mob_of([100.0], [100.0]), g, S.SCENARIOS["home"], FLEET)
    assert d.home[0] == pytest.approx(100 * 0.183 / 0.9, rel=1e-12)
    assert d.home[0] == pytest.approx(20.33, abs=5e-3)


def test_poi_split_follows_point_counts():
    g = replace(grid_with(workplaces=[1, 1, 1, 1]), pois=np.array([1, 3, 0, 0]))
    d = S.spatial_demand(mob_of([10, 20, 30, 40], [25, 25, 25, 25]), g, S.ChargingShares(0, 0, 1), FLEET)
    np.testing.assert_allclose(d.poi / d.poi.sum(), [0.25, 0.75, 0, 0], rtol=1e-12)
    assert d.poi[2] == 0 and d.poi[3] == 0


def test_no_pois_raises_only_when_needed():
    g = replace(grid_with(), pois=np.zeros(4, dtype=np.int64))
    m = mob_of([1, 2, 3, 4], [4, 3, 2, 1])
    with pytest.raises(InputDataError, match="no POIs"):
        S.spatial_demand(m, g, S.SCENARIOS["mixed"], FLEET)
    assert S.spatial_demand(m, g, S.SCENARIOS["home"], FLEET).total.sum() > 0


@pytest.mark.parametrize("shares", [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0.25, 0.25, 0.5), (0.2, 0.3, 0.5)])
def test_total_is_share_invariant(shares):
    g = replace(grid_with(), pois=np.array([2, 0, 5, 1]))
    m = mob_of([10, 20, 30, 40], [40, 10, 30, 20])
    d = S.spatial_demand(m, g, S.ChargingShares(*shares), FLEET)
    assert d.totals()["total"] == pytest.approx(100 * 0.183 / 0.9, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e4), min_size=4, max_size=4), st.floats(0.1, 10))
def test_linear_in_vkm(vkm, k):
    g = replace(grid_with(), pois=np.array([1, 1, 0, 2]))
    a = S.spatial_demand(mob_of(vkm, vkm[::-1]), g, S.SCENARIOS["mixed"], FLEET)
    b = S.spatial_demand(mob_of(np.multiply(vkm, k), np.multiply(vkm[::-1], k)), g, S.SCENARIOS["mixed"], FLEET)
    np.testing.assert_allclose(b.total, k * a.total, rtol=1e-9, atol=1e-9)


def test_lower_efficiency_means_more_grid_energy():
    g = grid_with()
    m = mob_of([10, 20, 30, 40], [40, 10, 30, 20])
    e = [S.spatial_demand(m, g, S.SCENARIOS["work"], FLEET, eta).total.sum() for eta in (1.0, 0.9, 0.8, 0.5)]
    assert np.all(np.diff(e) > 0)
    with pytest.raises(ConfigError):
        S.spatial_demand(m, g, S.SCENARIOS["work"], FLEET, 0.0)


def test_shares_validation():
    with pytest.raises(ConfigError):
        S.ChargingShares(0.5, 0.3, 0.1)
    with pytest.raises(ConfigError):
        S.ChargingShares(1.2, -0.2, 0.0)


def test_fleet_validation():
    with pytest.raises(ConfigError):
        S.FleetSpec((S.VehicleClass("A", 0.5, 60, 0.18),))
    assert FLEET.mean_consumption == pytest.approx(0.183)


def test_geojson_zero_demand_and_single_zone(tmp_path):
    g = grid_with(1)
    d = S.spatial_demand(mob_of([0.0], [0.0]), g, S.SCENARIOS["home"], FLEET)
    S.export_demand_map(d, g, tmp_path / "d.geojson")
    doc = json.loads((tmp_path / "d.geojson").read_text())
    assert len(doc["features"]) == 1
    assert doc["features"][0]["properties"]["E_total_kwh"] == 0.0


def test_geojson_byte_stable(tmp_path, case):
    d = S.spatial_demand(case.mob, case.grid, S.SCENARIOS["mixed"], FLEET)
    S.export_demand_map(d, case.grid, tmp_path / "a.geojson")
    S.export_demand_map(d, case.grid, tmp_path / "b.geojson")
    S.export_demand_csv(d, tmp_path / "a.csv")
    assert (tmp_path / "a.geojson").read_bytes() == (tmp_path / "b.geojson").read_bytes()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == case.grid.n_zones + 1


def test_addis_daily_total(case):
    d = S.spatial_demand(case.mob, case.grid, S.SCENARIOS["home"], FLEET)
    assert d.totals()["total"] / 1e3 == pytest.approx(353.0, rel=0.10)
    assert d.totals()["total"] == pytest.approx(case.mob.vkm_out.sum() * 0.183 / 0.9, rel=1e-9)
