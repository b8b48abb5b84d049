import json
import logging

import numpy as np
import pytest

from solab import __version__
from solab.errors import InsufficientDataError, SchemaError
from solab.io import (
    MANIFEST_NAME,
    SNAPSHOT_COLUMNS,
    Manifest,
    jsonable,
    read_barrier,
    read_snapshot,
    read_table,
    read_trajectory,
    write_bryant,
    write_rescaled,
    write_snapshot,
    write_trajectory,
    write_verdict,
)
from solab.levelset_flow import ErrorModel, FlowTrajectory, cylinder, integrate, sphere
from solab.warped_geometry import RadialProfile


@pytest.fixture
def solab_caplog(caplog, monkeypatch):
    monkeypatch.setattr(logging.getLogger("solab"), "propagate", True)
    caplog.set_level(logging.WARNING, logger="solab")
    return caplog


# ----------------------------
# snapshots
# ----------------------------
@pytest.mark.parametrize(
    "profile,desc",
    [
        (RadialProfile(np.linspace(-3.0, 3.0, 31), 1.0 / 3.0 + np.exp(np.linspace(-3.0, 3.0, 31)) / 7, s=10.0 / 3.0), "open"),
        (sphere(100.0, 64), "closed"),
    ],
)
def test_snapshot_is_bit_identical(tmp_path, profile, desc):
    path = write_snapshot(tmp_path / "snap.csv", profile, ErrorModel())
    back = read_snapshot(path)
    np.testing.assert_array_equal(back.z_grid, profile.z_grid, err_msg=desc)
    np.testing.assert_array_equal(back.F_values, profile.F_values, err_msg=desc)
    assert back.s == profile.s, desc
    assert back.closed == profile.closed, desc


def test_snapshot_has_documented_columns(tmp_path):
    path = write_snapshot(tmp_path / "snap.csv", sphere(50.0, 64))
    meta, data = read_table(path, SNAPSHOT_COLUMNS)
    assert meta["version"] == "1" and meta["closed"] == "true"
    assert np.isnan(data["K_rad"][0]) and np.isnan(data["Rbar"][-1])
    np.testing.assert_allclose(data["Rbar"][1:-1], 4 * data["K_rad"][1:-1] + 2 * data["K_orb"][1:-1])


def test_snapshot_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("s,z\n1,0\n1,1\n", encoding="utf8")
    with pytest.raises(SchemaError, match="F"):
        read_snapshot(path)


def test_snapshot_varying_s(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("s,z,F\n1,0,1\n2,1,1\n", encoding="utf8")
    with pytest.raises(SchemaError):
        read_snapshot(path)


def test_snapshot_version_mismatch_warns(tmp_path, solab_caplog):
    rows = "\n".join(f"5,{z},2" for z in range(12))
    path = tmp_path / "old.csv"
    path.write_text(f"# solab snapshot version=0\ns,z,F\n{rows}\n", encoding="utf8")
    profile = read_snapshot(path)
    assert len(profile) == 12 and not profile.closed
    assert "snapshot version 0" in solab_caplog.text


# ----------------------------
# trajectories and manifest
# ----------------------------
def test_trajectory_round_trip_and_manifest(tmp_path):
    traj = integrate(cylinder(100.0, 40.0, 64), ErrorModel("zero"), [100.0, 90.0, 80.0])
    manifest = Manifest(tmp_path, config={"flow": {"s1": 100.0}})
    paths = write_trajectory(tmp_path / "traj", traj, manifest)
    assert [p.name for p in paths] == ["snapshot_000.csv", "snapshot_001.csv", "snapshot_002.csv", "trajectory.json"]

    back = read_trajectory(tmp_path / "traj", ErrorModel("zero"))
    np.testing.assert_array_equal(back.s_values, traj.s_values)
    for a, b in zip(back.snapshots, traj.snapshots):
        np.testing.assert_array_equal(a.F_values, b.F_values)
    assert back.status == "complete"

    out = manifest.write()
    assert out.name == MANIFEST_NAME
    entries = json.loads(out.read_text(encoding="utf8"))["entries"]
    assert [e["file"] for e in entries][-1] == "traj/trajectory.json"
    assert {e["kind"] for e in entries} == {"snapshot", "trajectory"}
    assert all(e["tool_version"] == __version__ for e in entries)
    assert entries[0]["config"] == {"flow": {"s1": 100.0}}


def test_manifest_replaces_duplicate_entries(tmp_path):
    manifest = Manifest(tmp_path)
    manifest.add(tmp_path / "a.json", "verdict")
    manifest.add(tmp_path / "a.json", "report")
    assert manifest.entries == [{"file": "a.json", "kind": "report", "tool_version": __version__, "config": {}}]


def test_read_trajectory_needs_snapshots(tmp_path):
    with pytest.raises(InsufficientDataError):
        read_trajectory(tmp_path)


def test_rescaled_and_bryant_tables(tmp_path):
    from solab.bryant import solve_bryant

    traj = FlowTrajectory(
        (cylinder(100.0, 40.0, 64), cylinder(80.0, 40.0, 64)), np.array([100.0, 80.0]), (None, None), ErrorModel("zero")
    )
    _, data = read_table(write_rescaled(tmp_path / "rescaled.csv", traj), ("tau", "xi", "G", "G_xi"))
    assert len(data["tau"]) == 130
    np.testing.assert_allclose(data["G"], 0.0, atol=1e-14)

    bryant = solve_bryant(10.0, n_points=100)
    _, data = read_table(write_bryant(tmp_path / "bryant.csv", bryant), ("r", "phi", "phi_prime", "fprime", "R"))
    np.testing.assert_array_equal(data["R"], bryant.R)


# ----------------------------
# barrier and verdict files
# ----------------------------
def test_read_barrier_without_parameter(tmp_path):
    path = tmp_path / "psi.csv"
    rows = "\n".join(f"{x},{2 - x},-1" for x in (0.5, 0.6, 0.7, 0.8, 1.0))
    path.write_text(f"s_hat,psi,psi_prime\n{rows}\n", encoding="utf8")
    with pytest.raises(SchemaError):
        read_barrier(path)
    barrier = read_barrier(path, a=100.0)
    assert barrier.provenance == "user-supplied"
    assert barrier.r_star == pytest.approx(50.0)


def test_jsonable_and_verdict(tmp_path):
    data = {"x": np.float64(np.inf), "n": np.int64(3), "flags": np.array([True, False]), "v": (1.5, np.nan)}
    assert jsonable(data) == {"x": "inf", "n": 3, "flags": [True, False], "v": [1.5, "nan"]}
    path = write_verdict(tmp_path / "verdict.json", {"overall": "pass"})
    assert json.loads(path.read_text(encoding="utf8")) == {"overall": "pass"}
