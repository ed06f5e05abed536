import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evpv import analysis as A
from evpv import spatial as S
from evpv import temporal as T
from evpv.config import bundled_path
from evpv.errors import ConfigError, InputDataError
from evpv.pv import PVProfile
from oracles import pl_min_integral, pl_value


def grid_series(f, dt_h):
    t = (np.arange(round(24 / dt_h)) + 0.5) * dt_h
    return np.array([pl_value(*f, x) for x in t])


# --- indicators ------------------------------------------------------------------

def test_trivial_cases():
    one, two, zero = np.ones(96), np.full(96, 2.0), np.zeros(96)
    assert A.self_sufficiency(two, one) == 1.0 and A.self_consumption(two, one) == 0.5
    assert A.self_sufficiency(zero, one) == 0.0 and A.self_consumption(zero, one) is None
    assert A.self_sufficiency(one, zero) is None and A.self_consumption(one, zero) == 0.0
    assert A.energy_coverage(two, one) == 2.0 and A.energy_coverage(one, zero) is None
    with pytest.raises(ValueError):
        A.self_sufficiency(np.ones(3), np.ones(4))


def test_disjoint_supports_give_zero():
    pv = np.r_[np.zeros(48), np.ones(48)]
    ev = np.r_[np.ones(48), np.zeros(48)]
    assert A.self_sufficiency(pv, ev) == 0.0


@pytest.mark.parametrize("h", [0.3, 0.6, 1.2])
def test_triangle_vs_trapezoid_exact(h):
    """PV triangle (6-18 h, peak 1 at noon) against a flat-topped EV pulse 9-15 h."""
    pv = ([6.0, 12.0, 18.0], [0.0, 1.0, 0.0])
    ev = ([9.0, 10.0, 14.0, 15.0], [0.0, h, h, 0.0])
    e_ev = h * 5.0
    exact_ss = pl_min_integral(pv, ev, 0.0, 24.0) / e_ev
    exact_sc = pl_min_integral(pv, ev, 0.0, 24.0) / 6.0
    dt_h = 1 / 60
    p, e = grid_series(pv, dt_h), grid_series(ev, dt_h)
    assert A.self_sufficiency(p, e, dt_h) == pytest.approx(exact_ss, abs=1e-4)
    assert A.self_consumption(p, e, dt_h) == pytest.approx(exact_sc, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=96, max_size=96), st.lists(st.floats(0, 50), min_size=96, max_size=96))
def test_indicator_identities(pv, ev):
    pv, ev = np.array(pv), np.array(ev)
    ss, sc = A.self_sufficiency(pv, ev), A.self_consumption(pv, ev)
    if ss is not None:
        assert 0 <= ss <= 1 + 1e-12
    if ss is not None and sc is not None:
        assert ss * ev.sum() == pytest.approx(sc * pv.sum(), rel=1e-9, abs=1e-9)
    if ss is not None:
        assert A.self_sufficiency(2 * pv, ev) >= ss - 1e-12


def test_weekdays_2020():
    assert A.weekdays(2020).size == 262
    assert A.weekdays(2020, ["2020-01-07"]).size == 261  # a Tuesday
    assert A.weekdays(2020, ["2020-01-04"]).size == 262  # a Saturday
    assert str(A.weekdays(2020)[0]) == "2020-01-01"


def test_pv_on_day_uses_local_time():
    t = np.arange(np.datetime64("2020-01-01T00:00"), np.datetime64("2020-01-03T00:00"),
                  np.timedelta64(1, "h")).astype("datetime64[s]")
    hours = (t - t[0]).astype(int) / 3600.0
    prof = PVProfile(t, hours, 1.0, 10.0, 180.0)
    p = A.pv_on_day(prof, "2020-01-01", 3.0, dt_h=1.0)
    # local midnight on 1 Jan is 21:00 UTC on 31 Dec, outside the series -> 0
    assert p[0] == 0.0 and p[3] == pytest.approx(0.5)
    assert p[10] == pytest.approx(7.5)


def test_day_of_year():
    assert A.day_of_year("2020-01-01") == 0 and A.day_of_year("2020-12-31") == 365


def test_box_stats():
    b = A.box_stats([1, 2, 3, 4, 100, np.nan])
    assert b["n"] == 5 and b["outliers"] == [100.0] and b["whisker_high"] == 4.0
    assert A.box_stats([np.nan])["n"] == 0


def flat_pv(days=3):
    t = np.arange(np.datetime64("2020-01-01T00:00"), np.datetime64("2020-01-01T00:00") + np.timedelta64(24 * days, "h"),
                  np.timedelta64(1, "h")).astype("datetime64[s]")
    hr = ((t.astype("int64") // 3600) % 24 + 3) % 24
    s = np.sin((hr - 6) / 12 * np.pi)
    return PVProfile(t, np.where(s > 1e-9, s, 0.0), 1.0, 10.0, 180.0)


def test_capacity_sweep_monotone_and_limits():
    dates = np.array(["2020-01-02"], dtype="datetime64[D]")
    rng = np.random.default_rng(0)
    loads = {"a": rng.random((1, 96)) * 10, "b": np.zeros((1, 96))}
    res = A.capacity_sweep(flat_pv(), loads, dates, 10, capacities=(0.0, 0.5, 1.0, 2.0, 1e9))
    ss = [res[("a", c)].ss[0] for c in (0.0, 0.5, 1.0, 2.0, 1e9)]
    assert ss[0] == 0.0 and np.all(np.diff(ss) >= 0)
    # enormous PV covers every daylight bin; night load remains uncovered
    night = A.pv_on_day(flat_pv(), dates[0], 3.0) == 0
    assert ss[-1] == pytest.approx(1 - loads["a"][0][night].sum() / loads["a"][0].sum(), abs=1e-9)
    assert np.isnan(res[("b", 1.0)].ss[0])
    with pytest.raises(ConfigError):
        A.complementarity("a", -1, flat_pv(), loads["a"], dates, 10, 3.0)
    with pytest.raises(InputDataError):
        A.complementarity("a", 1, flat_pv(), loads["a"], dates, 0, 3.0)


def test_writers(tmp_path):
    dates = np.array(["2020-01-02", "2020-01-03"], dtype="datetime64[D]")
    res = A.capacity_sweep(flat_pv(), {"a": np.ones((2, 96))}, dates, 10, capacities=(1.0,))
    A.write_indicators_csv(tmp_path / "i.csv", res)
    A.write_monthly_csv(tmp_path / "m.csv", res)
    A.write_boxplot_json(tmp_path / "b.json", res)
    assert len((tmp_path / "i.csv").read_text().splitlines()) == 3
    assert json.loads((tmp_path / "b.json").read_text())[0]["n"] == 2
    assert res[("a", 1.0)].monthly()[1][2] == 2


def test_daily_loads_thread_invariant(small_case):
    sc = T.Scenario(S.SCENARIOS["mixed"])
    dates = A.weekdays(2020)[:4]
    a = A.daily_ev_loads(small_case.fleet, sc, dates, 0, threads=1)
    b = A.daily_ev_loads(small_case.fleet, sc, dates, 0, threads=3)
    np.testing.assert_array_equal(a, b)
    ref = A.total_load(T.simulate_day(small_case.fleet, sc, 0, A.day_of_year(dates[2])))
    np.testing.assert_allclose(a[2], ref)


# --- fleet dynamics and grid context ---------------------------------------------------

@pytest.mark.parametrize("sigma,years", [(1.0, 3.65), (0.5, 8.11), (0.2, 35.83)])
def test_time_to_one_sixth(sigma, years):
    dyn = A.FleetDynamics(0.05, sigma)
    t = A.time_to_share(1 / 6, dyn)
    assert t == pytest.approx(years, abs=0.01)
    assert A.fleet_share(t, dyn) == pytest.approx(1 / 6, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 0.99))
def test_share_inverse(lam, sigma, frac):
    dyn = A.FleetDynamics(lam, sigma)
    target = frac * sigma
    if target <= 0:
        return
    assert A.fleet_share(A.time_to_share(target, dyn), dyn) == pytest.approx(target, abs=1e-9)


def test_unreachable_target():
    with pytest.raises(ValueError, match="unreachable"):
        A.time_to_share(0.3, A.FleetDynamics(0.05, 0.2))
    with pytest.raises(ConfigError):
        A.FleetDynamics(0.0, 0.5)


def test_reference_load_scaling():
    nat = A.read_load_curve(bundled_path("national_load"))
    ref = A.scale_reference_load(nat, 5.54e6, 8.88e6, 2100.0)
    assert ref.share == pytest.approx(5.54 / 8.88 * 2100 / nat.max(), rel=1e-12)
    assert ref.peak_mw == pytest.approx(1310.1, abs=0.5)
    assert ref.daily_energy_mwh == pytest.approx(23198.0, abs=1.0)
    np.testing.assert_allclose(ref.scaled_mw / nat, ref.share)
    assert A.scale_reference_load(nat, 1, 2).share == 0.5
    with pytest.raises(InputDataError):
        A.scale_reference_load(nat, 0, 2)


def test_uptake():
    ref = A.ReferenceLoad(np.full(24, 1000.0 / 24), 1.0)  # 1000 MWh/day
    assert A.ev_uptake_report(15.2, ref) == pytest.approx(1.52)
    assert A.ev_uptake_report(30.4, ref) == pytest.approx(2 * 1.52)
    assert A.ev_uptake_report(0.0, ref) == 0.0


def test_load_curve_validation(tmp_path):
    (tmp_path / "l.csv").write_text("hour,x\n0,1\n")
    with pytest.raises(InputDataError):
        A.read_load_curve(tmp_path / "l.csv")
