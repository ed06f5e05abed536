import json
import subprocess
import sys

import pytest

from evpv import cli
from evpv import pipeline as P
from evpv.config import load_config
from evpv.errors import ExternalServiceError

SMALL = """\
seed: 7
fleet:
  n_tot: 2000
charging:
  runs: 2
  point_runs: 2
  power_sweep_kw: [7.4, 22.0]
pv:
  tilt: 10
analysis:
  capacities: [1.0]
"""


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "small.yaml"
    p.write_text(SMALL)
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


def outputs(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file() and p.name != "manifest.json"}


def manifest(root):
    m = json.loads((root / "manifest.json").read_text())
    m.pop("timestamps")
    return m


@pytest.fixture(scope="module")
def full_runs(small_cfg, tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    assert run("run", "--config", small_cfg, "--out-dir", a) == 0
    assert run("run", "--config", small_cfg, "--out-dir", b, "--threads", "3") == 0
    return a / "v0.1.0", b / "v0.1.0"


def test_zones_only(small_cfg, tmp_path):
    assert run("zones", "--config", small_cfg, "--out-dir", tmp_path) == 0
    names = {p.name for p in (tmp_path / "v0.1.0").iterdir()}
    assert names == {"zones.geojson", "zones.csv", "manifest.json", "config.json", ".cache"}
    assert list(manifest(tmp_path / "v0.1.0")["stages"]) == ["zones"]


def test_full_run_outputs(full_runs):
    root = full_runs[0]
    for name in ("demand_mixed.geojson", "profile_home.csv", "charging_points.csv", "power_sweep.csv",
                 "pv_hourly.csv", "indicators.csv", "indicators_boxplot.json", "report.json"):
        assert (root / name).is_file(), name
    assert set(manifest(root)["stages"]) == set(P.STAGES)


def test_repeat_runs_identical(full_runs):
    a, b = full_runs
    assert manifest(a) == manifest(b)
    oa, ob = outputs(a), outputs(b)
    # config.json records the thread cap, which differs on purpose between the two runs
    assert json.loads(oa.pop("config.json"))["threads"] == 1
    assert oa == {k: v for k, v in ob.items() if k != "config.json"}


def test_cached_rerun_byte_identical(full_runs, small_cfg):
    root = full_runs[0]
    before = outputs(root)
    assert run("run", "--config", small_cfg, "--out-dir", root.parent) == 0
    assert outputs(root) == before


def test_verb_reuses_upstream_cache(full_runs, small_cfg):
    root = full_runs[0]
    assert run("indicators", "--config", small_cfg, "--out-dir", root.parent) == 0
    assert set(manifest(root)["stages"]) == set(P.STAGES)


def test_pv_change_invalidates_only_downstream(small_cfg):
    base = P.Pipeline(load_config(small_cfg), "x")
    other = P.Pipeline(load_config(text=SMALL.replace("tilt: 10", "tilt: 12")), "x")
    changed = {s for s in P.STAGES if base.key(s) != other.key(s)}
    assert changed == {"pv", "indicators"}
    reseeded = P.Pipeline(load_config(small_cfg).with_overrides(seed=8), "x")
    assert {s for s in P.STAGES if base.key(s) != reseeded.key(s)} == {"mobility", "demand", "profiles",
                                                                         "indicators", "report"}


def test_missing_upstream_exit_3(small_cfg, tmp_path, capsys):
    assert run("profiles", "--config", small_cfg, "--out-dir", tmp_path) == 3
    assert "run `evpv" in capsys.readouterr().err


def test_config_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("charging:\n  scenarios: [custom]\n  shares: {home: 0.5, work: 0.3, poi: 0.1}\n")
    assert run("zones", "--config", bad, "--out-dir", tmp_path) == 2
    assert "bad.yaml:3" in capsys.readouterr().err


def test_missing_input_exit_3(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("inputs:\n  boundary: gone.geojson\n")
    assert run("zones", "--config", cfg, "--out-dir", tmp_path) == 2  # caught at validation


def test_external_service_exit_4(tmp_path, monkeypatch):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("pv:\n  source: pvgis\n")

    def down(*a, **k):
        raise ExternalServiceError("PVGIS unreachable")

    monkeypatch.setattr(P.W, "fetch_pvgis_hourly", down)
    assert run("pv", "--config", cfg, "--out-dir", tmp_path) == 4


def test_flags_after_verb_and_console_entry(small_cfg, tmp_path):
    r = subprocess.run([sys.executable, "-m", "evpv.cli", "zones", "--config", str(small_cfg),
                        "--out-dir", str(tmp_path), "--seed", "3"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert out["stages"] == ["zones"]
    assert json.loads((tmp_path / "v0.1.0" / "config.json").read_text())["seed"] == 3
