"""
SVG figures for runs and reports.

matplotlib renders with the Agg backend, a fixed ``svg.hashsalt`` and no date
metadata, so the same input gives the same bytes. A plot whose series is
empty is skipped with a warning.
"""

import logging
import pathlib

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from solab.io import Manifest  # noqa: E402

log = logging.getLogger(__name__)

HASH_SALT = "solab"
STYLE = {
    "svg.hashsalt": HASH_SALT,
    "svg.fonttype": "path",
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
}


def _save(fig, path: pathlib.Path, manifest: Manifest | None, kind: str) -> pathlib.Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    if manifest is not None:
        manifest.add(path, kind)
    return path


def plot_profiles(path, trajectory, manifest: Manifest | None = None) -> pathlib.Path | None:
    """Radius F(z) of every snapshot."""
    if trajectory is None or len(trajectory) == 0:
        log.warning("no snapshots to plot, skipping %s", path)
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for profile in trajectory.snapshots:
            ax.plot(profile.z_grid, profile.F_values, linewidth=0.8, label=f"s = {profile.s:.6g}")
        ax.set_xlabel("z")
        ax.set_ylabel("F")
        ax.set_title("radius profiles")
        if len(trajectory) <= 8:
            ax.legend(fontsize="small")
        return _save(fig, pathlib.Path(path), manifest, "plot")


def plot_alpha(path, report, manifest: Manifest | None = None) -> pathlib.Path | None:
    """α(τ) against the reference 1/(2τ)."""
    if report is None or len(report) == 0:
        log.warning("no spectral series to plot, skipping %s", path)
        return None
    tau = report.tau
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(tau, report.alpha, marker=".", label="alpha")
        with np.errstate(divide="ignore"):
            ref = np.where(tau != 0, 1.0 / (2.0 * tau), np.nan)
        ax.plot(tau, ref, linestyle="--", label="1/(2 tau)")
        ax.set_xlabel("tau")
        ax.set_ylabel("alpha")
        ax.legend(fontsize="small")
        return _save(fig, pathlib.Path(path), manifest, "plot")


def plot_gammas(path, report, manifest: Manifest | None = None) -> pathlib.Path | None:
    """Γ⁺, Γ⁰ and Γ⁻ on a log scale."""
    if report is None or len(report) == 0:
        log.warning("no spectral series to plot, skipping %s", path)
        return None
    series = {"Gamma_plus": report.Gamma_plus, "Gamma_0": report.Gamma_0, "Gamma_minus": report.Gamma_minus}
    series = {k: v for k, v in series.items() if np.any(v > 0)}
    if not series:
        log.warning("all Gamma series vanish, skipping %s", path)
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, values in series.items():
            pos = values > 0
            ax.plot(report.tau[pos], values[pos], marker=".", label=name)
        ax.set_yscale("log")
        ax.set_xlabel("tau")
        ax.legend(fontsize="small")
        return _save(fig, pathlib.Path(path), manifest, "plot")


def plot_barrier(path, barrier, margins, manifest: Manifest | None = None) -> pathlib.Path | None:
    """ψ_a and the pointwise margins of its verification."""
    if barrier is None or margins is None or margins.ode_margin is None:
        log.warning("no barrier margins to plot, skipping %s", path)
        return None
    with plt.rc_context(STYLE):
        fig, (top, bottom) = plt.subplots(2, 1, sharex=True)
        top.plot(barrier.x, barrier.psi)
        top.set_yscale("log")
        top.set_ylabel("psi")
        bottom.plot(barrier.x, margins.ode_margin, label="ode")
        bottom.plot(barrier.x, margins.prop_margin, label="properties")
        bottom.set_yscale("symlog", linthresh=1e-12)
        bottom.set_xscale("log")
        bottom.set_xlabel("r / sqrt(2s)")
        bottom.set_ylabel("margin")
        bottom.legend(fontsize="small")
        return _save(fig, pathlib.Path(path), manifest, "plot")


def emit_plots(
    directory,
    *,
    trajectory=None,
    report=None,
    barrier=None,
    margins=None,
    manifest: Manifest | None = None,
) -> list[pathlib.Path]:
    """Write every plot whose inputs are given; returns the files written."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if trajectory is not None:
        written.append(plot_profiles(directory / "profiles.svg", trajectory, manifest))
    if report is not None:
        written.append(plot_alpha(directory / "alpha.svg", report, manifest))
        written.append(plot_gammas(directory / "gammas.svg", report, manifest))
    if barrier is not None:
        written.append(plot_barrier(directory / "barrier.svg", barrier, margins, manifest))
    return [p for p in written if p is not None]
