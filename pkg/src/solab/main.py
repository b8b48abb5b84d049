"""
solab command line.

Every subcommand reads the same layered configuration:
1. Defaults
2. --config file (``key = value`` lines)
3. pyproject.toml ([tool.solab] section)
4. Environment variables (SOLAB_*)
5. CLI arguments (--output-dir, --set key=value)

Exit codes: 0 when all checks pass, 1 when a completed run fails a check,
2 on usage or configuration errors.
"""

import contextlib
import math
import pathlib
from dataclasses import dataclass, field
from typing import Annotated, Any, Optional

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from solab import __app_name__, __version__
from solab.asymptotics import region_params_from_config, verify_trajectory
from solab.barrier import construct_barrier, supersolution_check, verify_barrier
from solab.bryant import compare_tip, solve_bryant
from solab.config import RunConfig, build_run_config, merge_config_files
from solab.errors import BarrierConstructionError, ConfigError, InsufficientDataError, SchemaError, SolabError
from solab.io import (
    Manifest,
    read_barrier,
    read_trajectory,
    write_barrier,
    write_bryant,
    write_rescaled,
    write_spectral,
    write_trajectory,
    write_verdict,
)
from solab.levelset_flow import error_model_from_config, pde_residual, r_max_bound_fit
from solab.levelset_flow import run as run_flow
from solab.log import setup_logging
from solab.plots import emit_plots
from solab.rescaled_flow import rho_max_recursion
from solab.spectral import Dichotomy, HermiteBasis, analyze, dichotomy_classify, error_norm_bound, mode_recursion_check

app = typer.Typer(add_completion=False, no_args_is_help=True)
barrier_app = typer.Typer(add_completion=False, no_args_is_help=True, help="Construct or verify barrier functions.")
app.add_typer(barrier_app, name="barrier")

USAGE_ERROR = 2
CHECK_FAILED = 1


# ----------------------------
# Shared options
# ----------------------------

ConfigOption = Annotated[Optional[pathlib.Path], typer.Option("--config", "-c", help="Config file with key = value lines")]
OutputOption = Annotated[Optional[str], typer.Option("--output-dir", "-o", help="Output directory (output.dir)")]
SetOption = Annotated[Optional[list[str]], typer.Option("--set", "-s", help="Override a config key: --set flow.s1=200")]
VerboseOption = Annotated[int, typer.Option("--verbose", "-v", count=True, help="-v for info, -vv for debug")]
PlainOption = Annotated[bool, typer.Option("--plain", help="Plain text summary without Rich formatting")]
NoPyprojectOption = Annotated[bool, typer.Option("--no_pyproject", help="Disable loading pyproject.toml")]
NoEnvOption = Annotated[bool, typer.Option("--no_env", help="Disable loading environment variables")]
TrajectoryOption = Annotated[
    Optional[pathlib.Path],
    typer.Option("--trajectory", "-t", help="Directory of snapshot CSVs from a previous simulate run"),
]


def version_callback(value: bool):
    """Show version and exit."""
    if value:
        typer.echo(f"{__app_name__} v{__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(False, "--version", "-V", callback=version_callback, is_eager=True, help="Show version"),
):
    """Numerical laboratory for the level-set flow of O(3)-symmetric steady solitons."""


# ----------------------------
# Helper functions
# ----------------------------

def parse_overrides(items: list[str] | None) -> dict[str, str]:
    """Turn ``key=value`` items into a dotted-key dict."""
    cfg: dict[str, str] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got '{item}'")
        cfg[key.strip()] = value.strip()
    return cfg


def load_run_config(
    config_file: pathlib.Path | None,
    output_dir: str | None,
    overrides: list[str] | None,
    no_pyproject: bool,
    no_env: bool,
) -> RunConfig:
    cli_cfg: dict[str, Any] = parse_overrides(overrides)
    cli_cfg["output.dir"] = output_dir
    cfg = merge_config_files(config_file=config_file, cli_cfg=cli_cfg, no_pyproject=no_pyproject, no_env=no_env)
    return build_run_config(cfg)


@contextlib.contextmanager
def exit_on_error():
    """Map solab errors onto exit codes."""
    try:
        yield
    except (ConfigError, SchemaError, FileNotFoundError) as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(code=USAGE_ERROR)
    except SolabError as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(code=CHECK_FAILED)


def _num(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.6g}"


@dataclass
class Stage:
    """Rows of one pipeline stage for the summary table."""

    name: str
    rows: list[tuple[str, str, str]] = field(default_factory=list)
    ok: bool = True

    def add(self, check: str, value: str, status: str) -> None:
        self.rows.append((check, value, status))
        if status == "fail":
            self.ok = False


def render(stages: list[Stage], plain: bool) -> None:
    if plain:
        for stage in stages:
            for check, value, status in stage.rows:
                typer.echo(f"{stage.name}\t{check}\t{value}\t{status}")
        return
    table = Table(title="solab summary")
    for col in ("stage", "check", "value", "status"):
        table.add_column(col)
    colors = {"pass": "green", "warn": "yellow", "fail": "red"}
    for stage in stages:
        for check, value, status in stage.rows:
            color = colors.get(status.split()[0], "white")
            table.add_row(stage.name, check, value, f"[{color}]{status}[/{color}]")
    Console().print(table)


class Run:
    """Outputs of one invocation: the config, the manifest and the stage results."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = pathlib.Path(cfg.output.dir)
        self.manifest = Manifest(self.out, cfg.to_dict())
        self.stages: list[Stage] = []

    def wants(self, fmt: str) -> bool:
        return fmt in self.cfg.output.formats

    @property
    def plots(self) -> bool:
        return self.cfg.output.plots and self.wants("svg")

    def finish(self, plain: bool) -> None:
        self.manifest.write()
        render(self.stages, plain)
        if not all(s.ok for s in self.stages):
            raise typer.Exit(code=CHECK_FAILED)


# ----------------------------
# Pipeline stages
# ----------------------------

def stage_simulate(run: Run):
    trajectory = run_flow(run.cfg)
    stage = Stage("simulate")
    stage.add("snapshots", str(len(trajectory)), "pass")
    status = "pass" if trajectory.status == "complete" else "fail"
    stage.add("status", trajectory.status, status)
    stage.add("r_max bound C", _num(r_max_bound_fit(trajectory).C), "pass")
    if len(trajectory) >= 3:
        res = pde_residual(trajectory)
        stage.add("pde residual (relative)", _num(float(np.max(res.relative))), "pass")
    if run.wants("csv"):
        write_trajectory(run.out / "trajectory", trajectory, run.manifest)
        write_rescaled(run.out / "rescaled.csv", trajectory, run.manifest)
    if run.plots:
        emit_plots(run.out, trajectory=trajectory, manifest=run.manifest)
    run.stages.append(stage)
    return trajectory


def load_or_simulate(run: Run, trajectory_dir: pathlib.Path | None):
    if trajectory_dir is None:
        return stage_simulate(run)

    if not trajectory_dir.is_dir():
        raise FileNotFoundError(f"trajectory directory '{trajectory_dir}' does not exist")
    return read_trajectory(trajectory_dir, error_model_from_config(run.cfg.error))


def stage_spectral(run: Run, trajectory):
    sp = run.cfg.spectral
    report = analyze(trajectory, HermiteBasis(sp.n_modes, sp.n_nodes), sp.cutoff_exponent)
    stage = Stage("analyze-spectral")
    result = dichotomy_classify(report, sp.dichotomy_threshold)
    stage.add("dichotomy", result.label.value, "pass" if result.label is Dichotomy.NEUTRAL else "warn")
    summary: dict[str, Any] = {"dichotomy": result.label.value, "error_norm_C": error_norm_bound(report)}
    stage.add("error norm C", _num(summary["error_norm_C"]), "pass")
    for name, check in (("mode recursion", mode_recursion_check), ("rho_max recursion", rho_max_recursion)):
        try:
            ledger = check(report, sp.recursion_cap)
        except InsufficientDataError as exc:
            stage.add(name, str(exc), "warn")
            continue
        worst = max((float(np.max(C, initial=0.0)) for C in ledger.constants.values()), default=0.0)
        stage.add(name, f"max C = {_num(worst)}", "pass" if ledger.ok else "fail")
        summary[name.replace(" ", "_")] = {k: v for k, v in ledger.constants.items()}
    if run.wants("csv"):
        write_spectral(run.out / "spectral.csv", report, run.manifest)
    if run.wants("json"):
        write_verdict(run.out / "spectral.json", summary, run.manifest, kind="spectral")
    if run.plots:
        emit_plots(run.out, report=report, manifest=run.manifest)
    run.stages.append(stage)
    return report


def _barrier_outputs(run: Run, barrier, report, stage: Stage) -> None:
    for name, margin in report.margins.items():
        stage.add(name, _num(margin), "fail" if name in report.failures else "pass")
    if run.wants("csv"):
        write_barrier(run.out / "barrier.csv", barrier, report, run.manifest)
    if run.wants("json"):
        verdict = {
            "a": barrier.a,
            "provenance": barrier.provenance,
            "margins": report.margins,
            "locations": report.locations,
            "fitted": report.fitted,
            "passed": report.passed,
        }
        write_verdict(run.out / "barrier.json", verdict, run.manifest, kind="barrier")
    if run.plots:
        emit_plots(run.out, barrier=barrier, margins=report, manifest=run.manifest)


def stage_barrier_construct(run: Run):
    b = run.cfg.barrier
    stage = Stage("barrier")
    run.stages.append(stage)
    try:
        barrier = construct_barrier(b.a, b.a_min, b.n_verify)
    except BarrierConstructionError as exc:
        stage.add("construct", f"{exc.prop} at {_num(exc.location)}", "fail")
        return None
    stage.add("construct", f"N = {_num(barrier.N)}, r_* = {_num(barrier.r_star)}", "pass")
    _barrier_outputs(run, barrier, verify_barrier(barrier), stage)
    return barrier


def stage_bryant(run: Run):
    br = run.cfg.bryant
    profile = solve_bryant(br.r_max, br.tol)
    stage = Stage("bryant")
    stage.add("identity drift", _num(float(np.max(profile.identity_drift))), "pass")
    stage.add("phi' at r_max", _num(float(profile.phi_prime[-1])), "pass")
    far = profile.r_grid >= profile.r_grid[-1] / 10
    rR = profile.r_grid[far] * profile.R[far]
    stage.add("r R plateau drift", _num(float((rR.max() - rR.min()) / rR.mean())), "pass")
    self_check = compare_tip(profile, profile)
    stage.add("self comparison", _num(self_check.discrepancy), "pass" if self_check.discrepancy == 0 else "fail")
    if run.wants("csv"):
        write_bryant(run.out / "bryant.csv", profile, run.manifest)
    run.stages.append(stage)
    return profile


def stage_asymptotics(run: Run, trajectory, report=None, barrier=None):
    verdict = verify_trajectory(
        trajectory,
        region_params_from_config(run.cfg.asymptotics),
        spectral_report=report,
        dichotomy_threshold=run.cfg.spectral.dichotomy_threshold,
    )
    stage = Stage("verify-asymptotics")
    for check in verdict.checks:
        value = check.note or _num(check.max_rel_error)
        stage.add(check.name, value, check.status)
    if barrier is not None:
        sup = supersolution_check(trajectory, barrier)
        stage.add("supersolution", _num(sup.margin), {True: "pass", False: "fail", None: "warn"}[sup.passed])
    stage.add("overall", verdict.overall, "fail" if verdict.overall == "fail" else verdict.overall)
    if run.wants("json"):
        write_verdict(run.out / "verdict.json", verdict, run.manifest)
    run.stages.append(stage)
    return verdict


# ----------------------------
# CLI commands
# ----------------------------

@app.command()
def simulate(
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Integrate the level-set flow from s1 down to s0 and write the snapshots."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        stage_simulate(run)
    run.finish(plain)


@app.command("analyze-spectral")
def analyze_spectral(
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    trajectory: TrajectoryOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Project the rescaled profiles on the Hermite basis and check the mode recursions."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        stage_spectral(run, load_or_simulate(run, trajectory))
    run.finish(plain)


@barrier_app.command("construct")
def barrier_construct(
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Shoot a barrier for barrier.a and verify it."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        stage_barrier_construct(run)
    run.finish(plain)


@barrier_app.command("verify")
def barrier_verify(
    input_file: Annotated[pathlib.Path, typer.Argument(help="Barrier CSV with s_hat, psi, psi_prime")],
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Verify barrier samples from a CSV file."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        if not input_file.exists():
            raise FileNotFoundError(f"barrier file '{input_file}' does not exist")
        barrier = read_barrier(input_file)
        stage = Stage("barrier")
        run.stages.append(stage)
        _barrier_outputs(run, barrier, verify_barrier(barrier), stage)
    run.finish(plain)


@app.command()
def bryant(
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Solve the Bryant soliton ODE to bryant.r_max."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        stage_bryant(run)
    run.finish(plain)


@app.command("verify-asymptotics")
def verify_asymptotics(
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    trajectory: TrajectoryOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Check a trajectory against the cylindrical, intermediate and tip predictions."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        traj = load_or_simulate(run, trajectory)
        report = None
        if len(traj) >= 2:
            sp = run.cfg.spectral
            report = analyze(traj, HermiteBasis(sp.n_modes, sp.n_nodes), sp.cutoff_exponent)
        stage_asymptotics(run, traj, report)
    run.finish(plain)


@app.command()
def report(
    config: ConfigOption = None,
    output_dir: OutputOption = None,
    overrides: SetOption = None,
    verbose: VerboseOption = 0,
    plain: PlainOption = False,
    no_pyproject: NoPyprojectOption = False,
    no_env: NoEnvOption = False,
):
    """Run simulate, analyze-spectral, barrier, bryant and verify-asymptotics in turn."""
    setup_logging(verbose)
    with exit_on_error():
        run = Run(load_run_config(config, output_dir, overrides, no_pyproject, no_env))
        trajectory = stage_simulate(run)
        spectral_report = stage_spectral(run, trajectory)
        barrier = stage_barrier_construct(run)
        stage_bryant(run)
        stage_asymptotics(run, trajectory, spectral_report, barrier)
    run.finish(plain)


if __name__ == "__main__":
    app()
