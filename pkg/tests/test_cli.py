import csv
import json
from pathlib import Path

import numpy as np
import pytest

from uplinksim.cli import DEFAULTS, build_experiment_config, load_settings, main


def run(args):
    return main([str(a) for a in args])


SMALL = {
    "topology.stations": "9",
    "region.width_km": "12",
    "region.height_km": "12",
    "window.width_km": "6",
    "window.height_km": "6",
    "beam.sectors": "6",
    "sweep.trials": "2",
    "sweep.cm_grid": "0.5,1",
}


def small_args(extra=()):
    out = []
    for k, v in SMALL.items():
        out += ["--set", f"{k}={v}"]
    return out + list(extra)


# --- gen-topology -------------------------------------------------------------


def test_gen_topology_roundtrip(tmp_path):
    out = tmp_path / "topo.csv"
    assert run(["gen-topology", "--stations", 121, "--seed", 3, "--out", out]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 121
    assert set(rows[0]) == {"id", "x_km", "y_km"}
    for r in rows:
        x, y = float(r["x_km"]), float(r["y_km"])
        assert 0 <= x <= 30 and 0 <= y <= 30


def test_gen_topology_exact_grid_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["gen-topology", "--stations", 9, "--jitter-km", 0, "--width-km", 12, "--height-km", 12, "--out", a])
    rows = list(csv.DictReader(open(a)))
    xs = sorted({float(r["x_km"]) for r in rows})
    assert xs == pytest.approx([2.0, 6.0, 10.0])
    run(["gen-topology", "--stations", 9, "--jitter-km", 0, "--width-km", 12, "--height-km", 12, "--out", b])
    assert a.read_bytes() == b.read_bytes()


def test_gen_topology_rejects_zero_stations(capsys):
    assert run(["gen-topology", "--stations", 0]) == 2


# --- config handling -------------------------------------------------------------


def test_load_settings_file_and_overrides(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("# comment\nseed = 7\nsweep.trials = 11  # inline comment\n")
    settings = load_settings(str(cfgfile), {"sweep.trials": "13"})
    assert settings["seed"] == "7"
    assert settings["sweep.trials"] == "13"  # override wins
    assert settings["hop.channels"] == DEFAULTS["hop.channels"]


def test_unknown_key_rejected(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("sweep.trails = 5\n")
    assert run(["sweep", "--config", cfgfile, "--out", tmp_path]) == 2


def test_missing_config_rejected(tmp_path):
    assert run(["sweep", "--config", tmp_path / "nope.cfg", "--out", tmp_path]) == 2


def test_topology_file_used(tmp_path):
    topo = tmp_path / "topo.csv"
    run(["gen-topology", "--stations", 9, "--width-km", 12, "--height-km", 12, "--out", topo])
    settings = load_settings(None, dict(SMALL, **{"topology.file": str(topo)}))
    cfg = build_experiment_config(settings)
    assert cfg.topology.n_stations == 9
    assert cfg.topology.region.width == 12.0


# --- sweep --------------------------------------------------------------------


def test_sweep_minimal(tmp_path):
    assert run(["sweep", "--out", tmp_path] + small_args(["--set", "sweep.cm_grid=1", "--set", "sweep.shadowing=on", "--set", "sweep.hopping=on"])) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 1
    assert 0.0 <= float(rows[0]["avg_outage"]) <= 1.0
    assert rows[0]["shadowing"] == "on" and rows[0]["hopping"] == "on"


def test_sweep_cartesian_rows_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["sweep", "--out", a] + small_args()) == 0
    assert run(["sweep", "--out", b] + small_args()) == 0
    rows = list(csv.DictReader(open(a / "sweep.csv")))
    assert len(rows) == 2 * 2 * 2  # grid x shadowing x hopping
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    for r in rows:
        ase = float(r["ase_bpcu_per_km2"])
        assert ase == pytest.approx(20.0 * float(r["rate_bpcu"]) * (1 - float(r["avg_outage"])))


def test_sweep_json_format(tmp_path):
    assert run(["sweep", "--out", tmp_path, "--format", "json"] + small_args()) == 0
    rows = json.loads((tmp_path / "sweep.json").read_text())
    assert len(rows) == 8 and isinstance(rows[0]["avg_outage"], float)


def test_sweep_placement_infeasible_exit_code(tmp_path):
    args = small_args(
        [
            "--set", "topology.stations=4",
            "--set", "mobiles.density=2000000",
            "--set", "sweep.cm_grid=1",
            "--set", "sweep.shadowing=on",
        ]
    )
    assert run(["sweep", "--out", tmp_path] + args) == 3


# --- validate -----------------------------------------------------------------


def test_validate_small(capsys):
    assert run(["validate", "--cases", 3, "--draws", 20000, "--seed", 2]) == 0
    out = capsys.readouterr().out
    assert out.count("pass") + out.count("FAIL") >= 3


def test_validate_rejects_low_draws():
    assert run(["validate", "--cases", 3, "--draws", 999]) == 2


# --- rate-curve -----------------------------------------------------------------


def test_rate_curve(tmp_path):
    args = ["rate-curve", "--out", tmp_path, "--uplinks", 3, "--cm", "0.2", "--rates", "0.5,1,2"]
    assert run(args + small_args(["--set", "sweep.shadowing=on"])) == 0
    rows = list(csv.DictReader(open(tmp_path / "rate_curve.csv")))
    ids = {r["uplink_id"] for r in rows}
    assert ids == {"0", "1", "2", "avg"}
    assert len(rows) == 4 * 3
    for uid in ids:
        eps = [float(r["outage"]) for r in rows if r["uplink_id"] == uid]
        assert eps == sorted(eps)  # nondecreasing in rate


def test_rate_curve_rejects_bad_rates(tmp_path):
    assert run(["rate-curve", "--out", tmp_path, "--rates=-1,2"] + small_args()) == 2
