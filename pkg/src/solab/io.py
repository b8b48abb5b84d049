"""
CSV and JSON persistence for runs, reports and verdicts.

Floats are written with 17 significant digits so a snapshot read back is
bit-identical to the one written. Every file written through a Manifest is
recorded in ``manifest.json`` together with the tool version and the echoed
run configuration.
"""

import csv
import json
import logging
import math
import pathlib
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from solab import __version__
from solab.errors import InsufficientDataError, SchemaError
from solab.levelset_flow import ErrorModel, FlowTrajectory, eval_error
from solab.warped_geometry import RadialProfile, derivatives, sectional_curvatures

log = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
SNAPSHOT_COLUMNS = ("s", "z", "F", "F_z", "F_zz", "K_rad", "K_orb", "Rbar", "E_rad", "E_orb")
SNAPSHOT_REQUIRED = ("s", "z", "F")
RESCALED_COLUMNS = ("tau", "xi", "G", "G_xi")
BARRIER_COLUMNS = ("s_hat", "psi", "psi_prime", "margin_ode", "margin_props")
BRYANT_COLUMNS = ("r", "phi", "phi_prime", "fprime", "R")
MANIFEST_NAME = "manifest.json"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_rows(path: pathlib.Path, header: Sequence[str], columns: Iterable[np.ndarray], meta: str | None = None) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", encoding="utf8", newline="") as f:
        if meta is not None:
            f.write(f"# {meta}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([fmt(v) for v in row])


def dump_json(path: pathlib.Path, data: Any) -> None:
    with open(path, "w", encoding="utf8") as f:
        json.dump(jsonable(data), f, sort_keys=True, indent=2)
        f.write("\n")


def jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays, and non-finite floats, for JSON."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        x = float(value)
        return x if math.isfinite(x) else str(x)
    return value


# ----------------------------
# Manifest
# ----------------------------

@dataclass
class Manifest:
    """Entries ``{file, kind, tool_version, config}`` for an output directory."""

    directory: pathlib.Path
    config: dict[str, Any] = field(default_factory=dict)
    entries: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.directory = pathlib.Path(self.directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> pathlib.Path:
        return self.directory / name

    def add(self, path: pathlib.Path, kind: str) -> pathlib.Path:
        path = pathlib.Path(path)
        try:
            name = path.relative_to(self.directory).as_posix()
        except ValueError:
            name = path.name
        self.entries = [e for e in self.entries if e["file"] != name]
        self.entries.append({"file": name, "kind": kind, "tool_version": __version__, "config": self.config})
        return path

    def write(self) -> pathlib.Path:
        out = self.directory / MANIFEST_NAME
        dump_json(out, {"entries": sorted(self.entries, key=lambda e: e["file"])})
        return out


def _record(manifest: Manifest | None, path: pathlib.Path, kind: str) -> pathlib.Path:
    if manifest is not None:
        manifest.add(path, kind)
    return path


# ----------------------------
# Snapshots
# ----------------------------

def snapshot_columns(profile: RadialProfile, model: ErrorModel | None = None) -> dict[str, np.ndarray]:
    """The documented snapshot columns on the profile grid."""
    model = model or ErrorModel(kind="zero")
    F_z, F_zz = derivatives(profile)
    K_rad, K_orb = sectional_curvatures(profile, (F_z, F_zz))
    E_rad, E_orb = eval_error(model, profile)
    return {
        "s": np.full(len(profile), profile.s),
        "z": profile.z_grid,
        "F": profile.F_values,
        "F_z": F_z,
        "F_zz": F_zz,
        "K_rad": K_rad,
        "K_orb": K_orb,
        "Rbar": 4.0 * K_rad + 2.0 * K_orb,
        "E_rad": E_rad,
        "E_orb": E_orb,
    }


def write_snapshot(
    path: pathlib.Path | str,
    profile: RadialProfile,
    model: ErrorModel | None = None,
    manifest: Manifest | None = None,
) -> pathlib.Path:
    path = pathlib.Path(path)
    cols = snapshot_columns(profile, model)
    meta = f"solab snapshot version={SNAPSHOT_VERSION} closed={str(profile.closed).lower()}"
    _write_rows(path, SNAPSHOT_COLUMNS, (cols[c] for c in SNAPSHOT_COLUMNS), meta)
    return _record(manifest, path, "snapshot")


def _parse_meta(line: str) -> dict[str, str]:
    meta = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if sep:
            meta[key] = value
    return meta


def read_table(path: pathlib.Path | str, required: Sequence[str]) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Metadata line and float columns of a CSV written by this module.

    Raises:
        SchemaError: The header lacks a required column or the file is empty.
    """
    path = pathlib.Path(path)
    with open(path, "r", encoding="utf8", newline="") as f:
        lines = f.read().splitlines()
    meta: dict[str, str] = {}
    if lines and lines[0].startswith("#"):
        meta = _parse_meta(lines[0])
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows:
        raise SchemaError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
    data = {name: np.array([float(r[i]) for r in rows[1:]]) for i, name in enumerate(header)}
    return meta, data


def read_snapshot(path: pathlib.Path | str) -> RadialProfile:
    """Load a snapshot CSV. Only s, z and F are read back; the rest is derived.

    Raises:
        SchemaError: A required column is missing or s varies between rows.
    """
    meta, data = read_table(path, SNAPSHOT_REQUIRED)
    version = meta.get("version")
    if version != str(SNAPSHOT_VERSION):
        log.warning("%s: snapshot version %s, expected %d", path, version, SNAPSHOT_VERSION)
    s = data["s"]
    if len(s) == 0:
        raise SchemaError(f"{path}: no rows")
    if np.any(s != s[0]):
        raise SchemaError(f"{path}: column s must be constant")
    if "closed" in meta:
        closed = meta["closed"] == "true"
    else:
        closed = bool(data["F"][0] == 0 and data["F"][-1] == 0)
    return RadialProfile(data["z"], data["F"], float(s[0]), closed)


def write_trajectory(
    directory: pathlib.Path | str,
    trajectory: FlowTrajectory,
    manifest: Manifest | None = None,
) -> list[pathlib.Path]:
    """One snapshot CSV per profile plus ``trajectory.json`` with run metadata."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(trajectory) - 1)))
    paths = []
    for j, profile in enumerate(trajectory.snapshots):
        paths.append(write_snapshot(directory / f"snapshot_{j:0{width}d}.csv", profile, trajectory.error_model, manifest))
    summary = {
        "status": trajectory.status,
        "singularity": trajectory.singularity,
        "s_values": trajectory.s_values,
        "r_max": trajectory.r_max,
        "tip_distances": [list(t) if t is not None else None for t in trajectory.tip_distances],
        "error_model": trajectory.error_model.describe(),
    }
    out = directory / "trajectory.json"
    dump_json(out, summary)
    paths.append(_record(manifest, out, "trajectory"))
    return paths


def read_trajectory(directory: pathlib.Path | str, model: ErrorModel | None = None) -> FlowTrajectory:
    """Rebuild a trajectory from the snapshot CSVs written by write_trajectory.

    Raises:
        InsufficientDataError: The directory holds no snapshot files.
    """
    from solab.levelset_flow import tip_distances

    directory = pathlib.Path(directory)
    files = sorted(directory.glob("snapshot_*.csv"))
    if not files:
        raise InsufficientDataError(f"no snapshot files in {directory}")
    snaps = [read_snapshot(f) for f in files]
    status, singularity = "complete", None
    summary = directory / "trajectory.json"
    if summary.exists():
        data = json.loads(summary.read_text(encoding="utf8"))
        status = data.get("status", status)
        singularity = tuple(data["singularity"]) if data.get("singularity") else None
    return FlowTrajectory(
        snapshots=tuple(snaps),
        s_values=np.array([p.s for p in snaps]),
        tip_distances=tuple(tip_distances(p) for p in snaps),
        error_model=model or ErrorModel(),
        status=status,
        singularity=singularity,
    )


# ----------------------------
# Reports
# ----------------------------

def write_rescaled(path: pathlib.Path | str, trajectory: FlowTrajectory, manifest: Manifest | None = None) -> pathlib.Path:
    """Long-format CSV of G and G_ξ for every snapshot."""
    from solab.rescaled_flow import to_rescaled
    from solab.warped_geometry import finite_differences

    path = pathlib.Path(path)
    cols: list[list[np.ndarray]] = [[], [], [], []]
    for profile in trajectory.snapshots:
        r = to_rescaled(profile)
        G_xi, _ = finite_differences(r.xi_grid, r.G_values)
        cols[0].append(np.full(len(r), r.tau))
        cols[1].append(r.xi_grid)
        cols[2].append(r.G_values)
        cols[3].append(G_xi)
    _write_rows(path, RESCALED_COLUMNS, (np.concatenate(c) for c in cols))
    return _record(manifest, path, "rescaled")


def write_spectral(path: pathlib.Path | str, report, manifest: Manifest | None = None) -> pathlib.Path:
    path = pathlib.Path(path)
    n_modes = report.a.shape[1]
    header = ["tau", *(f"a{k}" for k in range(n_modes)),
              "gamma_plus", "gamma_0", "gamma_minus", "Gamma_plus", "Gamma_0", "Gamma_minus",
              "rho_max", "rho", "delta", "alpha", "A"]
    columns = [report.tau, *(report.a[:, k] for k in range(n_modes)),
               report.gamma_plus, report.gamma_0, report.gamma_minus,
               report.Gamma_plus, report.Gamma_0, report.Gamma_minus,
               report.rho_max, report.rho, report.delta, report.alpha, report.A]
    _write_rows(path, header, columns)
    return _record(manifest, path, "spectral")


def _barrier_meta(barrier) -> str:
    fields = {"a": barrier.a, "r_star": barrier.r_star, "N": barrier.N, "theta": barrier.theta}
    values = " ".join(f"{k}={fmt(v)}" for k, v in fields.items())
    return f"solab barrier {values} provenance={barrier.provenance}"


def write_barrier(path: pathlib.Path | str, barrier, report, manifest: Manifest | None = None) -> pathlib.Path:
    """Barrier samples with the pointwise margins of a MarginReport."""
    path = pathlib.Path(path)
    columns = [barrier.x, barrier.psi, barrier.psi_prime, report.ode_margin, report.prop_margin]
    _write_rows(path, BARRIER_COLUMNS, columns, meta=_barrier_meta(barrier))
    return _record(manifest, path, "barrier")


def read_barrier(path: pathlib.Path | str, a: float | None = None):
    """Load barrier samples for verification.

    ``a`` comes from the metadata line unless given. Without metadata r_* is
    taken from the first sample, N from the default joint and θ is fitted.

    Raises:
        SchemaError: A sample column is missing, or neither the file nor the
            caller supplies ``a``.
    """
    from solab.barrier import BarrierFunction, fit_theta

    meta, data = read_table(path, BARRIER_COLUMNS[:3])
    if a is None:
        if "a" not in meta:
            raise SchemaError(f"{path}: no barrier parameter a in the file")
        a = float(meta["a"])
    x, psi, dpsi = data["s_hat"], data["psi"], data["psi_prime"]
    r_star = float(meta["r_star"]) if "r_star" in meta else float(x[0] * a)
    N = float(meta.get("N", 4.0))
    theta = float(meta["theta"]) if "theta" in meta else fit_theta(a, x, psi)
    return BarrierFunction(a, r_star, N, theta, x, psi, dpsi, provenance=meta.get("provenance", "user-supplied"))


def write_bryant(path: pathlib.Path | str, bryant, manifest: Manifest | None = None) -> pathlib.Path:
    path = pathlib.Path(path)
    _write_rows(path, BRYANT_COLUMNS, [bryant.r_grid, bryant.phi, bryant.phi_prime, bryant.fprime, bryant.R])
    return _record(manifest, path, "bryant")


def write_verdict(path: pathlib.Path | str, verdict, manifest: Manifest | None = None, kind: str = "verdict") -> pathlib.Path:
    """Write a verdict (anything with ``to_dict``, or a plain dict) as JSON."""
    path = pathlib.Path(path)
    dump_json(path, verdict.to_dict() if hasattr(verdict, "to_dict") else verdict)
    return _record(manifest, path, kind)
