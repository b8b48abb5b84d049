import json
import shutil

import pytest
from typer.testing import CliRunner

from solab.main import app, parse_overrides
from solab.errors import ConfigError

runner = CliRunner()
ISOLATED = ["--no_env", "--no_pyproject"]


def invoke(*args):
    return runner.invoke(app, list(args))


def test_version():
    result = invoke("--version")
    assert result.exit_code == 0
    assert result.stdout.startswith("solab v")


@pytest.mark.parametrize(
    "items,expected,desc",
    [
        (None, {}, "no overrides"),
        (["flow.s1=200", " grid.n = 128 "], {"flow.s1": "200", "grid.n": "128"}, "stripped pairs"),
        (["output.formats=csv,json"], {"output.formats": "csv,json"}, "value with commas"),
    ],
)
def test_parse_overrides(items, expected, desc):
    assert parse_overrides(items) == expected, desc


def test_parse_overrides_rejects_bare_words():
    with pytest.raises(ConfigError):
        parse_overrides(["flow.s1"])


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "out"
    result = invoke("simulate", *ISOLATED, "-o", str(out), "-s", "flow.snapshots=3", "--plain")
    assert result.exit_code == 0, result.output
    assert "simulate\tsnapshots\t3\tpass" in result.stdout
    assert (out / "trajectory" / "snapshot_002.csv").exists()
    assert (out / "rescaled.csv").exists()
    assert (out / "profiles.svg").exists()
    entries = json.loads((out / "manifest.json").read_text(encoding="utf8"))["entries"]
    assert {e["kind"] for e in entries} == {"snapshot", "trajectory", "rescaled", "plot"}
    assert entries[0]["config"]["flow"]["snapshots"] == 3


def test_simulate_then_verify_from_disk(tmp_path):
    out = tmp_path / "out"
    sim = invoke("simulate", *ISOLATED, "-o", str(out), "-s", "flow.snapshots=3", "-s", "output.formats=csv", "--plain")
    assert sim.exit_code == 0, sim.output
    result = invoke(
        "verify-asymptotics", *ISOLATED, "-o", str(out), "-t", str(out / "trajectory"), "-s", "output.formats=json", "--plain"
    )
    assert result.exit_code == 0, result.output
    verdict = json.loads((out / "verdict.json").read_text(encoding="utf8"))
    assert verdict["overall"] in {"pass", "warn"}
    assert "cylindrical" in {c["name"] for c in verdict["checks"]}


@pytest.mark.parametrize(
    "args,desc",
    [
        (["nonsense"], "unknown subcommand"),
        (["simulate", *ISOLATED, "-s", "grid.n=10"], "grid too small"),
        (["simulate", *ISOLATED, "-s", "flow.speed=1"], "unknown key"),
        (["simulate", *ISOLATED, "-s", "flow.s1"], "override without value"),
        (["simulate", *ISOLATED, "-c", "does-not-exist.cfg"], "missing config file"),
        (["barrier", "verify", *ISOLATED, "does-not-exist.csv"], "missing barrier file"),
    ],
)
def test_usage_errors_exit_2(tmp_path, args, desc):
    result = invoke(*args, *(["-o", str(tmp_path)] if args[0] != "nonsense" else []))
    assert result.exit_code == 2, f"{desc}: {result.output}"


def test_bryant_command(tmp_path):
    result = invoke("bryant", *ISOLATED, "-o", str(tmp_path), "-s", "bryant.r_max=100", "--plain")
    assert result.exit_code == 0, result.output
    assert "bryant\tself comparison\t0\tpass" in result.stdout
    assert (tmp_path / "bryant.csv").exists()


def test_config_file_and_trajectory_option(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("flow.s1 = 100\nflow.s0 = 90\nflow.snapshots = 3\noutput.formats = json\n", encoding="utf8")
    result = invoke("analyze-spectral", *ISOLATED, "-c", str(cfg), "-o", str(tmp_path), "-t", str(tmp_path / "absent"))
    assert result.exit_code == 2, result.output


def files_under(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize(
    "args,desc",
    [
        (["simulate", "-s", "flow.snapshots=5"], "simulate"),
        (["analyze-spectral", "-s", "flow.snapshots=7"], "spectral analysis of a fresh run"),
        (["bryant"], "bryant"),
        pytest.param(["barrier", "construct", "-s", "barrier.n_verify=2000"], "barrier", marks=pytest.mark.slow),
    ],
)
def test_repeated_runs_are_byte_identical(tmp_path, args, desc):
    out = tmp_path / "out"
    runs = []
    for _ in range(2):
        result = invoke(*args, *ISOLATED, "-o", str(out), "--plain")
        assert result.exit_code in (0, 1), f"{desc}: {result.output}"
        runs.append(files_under(out))
        shutil.rmtree(out)
    first, second = runs
    assert first, f"{desc}: nothing written"
    changed = sorted(name for name in first.keys() | second.keys() if first.get(name) != second.get(name))
    assert not changed, f"{desc}: differs in {changed}"
