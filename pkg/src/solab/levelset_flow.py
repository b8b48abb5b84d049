"""
Level-set flow of the warping function F(z, s).

Implements the nonlocal evolution

    -F_s = F_zz - (1 + F_z²)/F + 2 F_z ((F_z/F)(0) - ∫₀^z F_z²/F²)
           - E_orb/F + F_z ∫₀^z E_rad

with pluggable error models, an explicit RK4 integrator that marches in the
well-posed direction ds < 0, a quadratic tip closure for closed profiles and
an a posteriori residual check across snapshots.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from solab.errors import (
    ConfigError,
    DirectionError,
    InsufficientDataError,
    ModelRejectionError,
    SingularityError,
    StepSizeError,
    ValidationError,
)
from solab.warped_geometry import RadialProfile, RegimeReport, finite_differences, regime_check

log = logging.getLogger(__name__)

ERROR_KINDS = ("zero", "default", "custom")
MAX_RELATIVE_STEP = 0.01


# ----------------------------
# Error model
# ----------------------------

@dataclass(frozen=True)
class ErrorModel:
    """Stand-in for the error terms E_rad and E_orb.

    ``default`` uses R_mod = 2/(2 + F²), E_orb = c_orb F² R_mod², E_rad =
    c_rad R_mod², which obeys E_rad <= 4 c_rad F⁻⁴ and E_orb <= 4 c_orb F⁻².
    ``custom`` wraps a callable ``profile -> (E_rad, E_orb)`` and is checked
    against ``bound`` at every evaluation.
    """

    kind: str = "default"
    c_rad: float = 0.5
    c_orb: float = 0.5
    func: Callable[[RadialProfile], tuple[np.ndarray, np.ndarray]] | None = field(default=None, compare=False)
    bound: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ERROR_KINDS:
            raise ConfigError(f"unknown error model kind '{self.kind}'", ["error.model"])
        if self.c_rad < 0 or self.c_orb < 0:
            raise ConfigError("error model coefficients must be nonnegative", ["error.c_rad", "error.c_orb"])
        if self.kind == "custom" and self.func is None:
            raise ConfigError("custom error model needs a callable", ["error.model"])

    @property
    def bound_constant(self) -> float:
        """C in E_rad <= C F⁻⁴ and E_orb <= C F⁻²."""
        if self.bound is not None:
            return float(self.bound)
        if self.kind == "zero":
            return 0.0
        return 4.0 * max(self.c_rad, self.c_orb)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "c_rad": self.c_rad, "c_orb": self.c_orb, "bound": self.bound_constant}


def _check_model_output(model: ErrorModel, F: np.ndarray, E_rad: np.ndarray, E_orb: np.ndarray) -> None:
    C = model.bound_constant
    pos = F > 0
    with np.errstate(divide="ignore"):
        lim_rad = np.where(pos, C / np.where(pos, F, 1.0) ** 4, np.inf)
        lim_orb = np.where(pos, C / np.where(pos, F, 1.0) ** 2, np.inf)
    bad_rad = (E_rad < 0) | (E_rad > lim_rad) | ~np.isfinite(E_rad)
    bad_orb = (E_orb < 0) | (E_orb > lim_orb) | ~np.isfinite(E_orb)
    first = [int(np.flatnonzero(b)[0]) if b.any() else len(F) for b in (bad_rad, bad_orb)]
    if min(first) == len(F):
        return
    term = "rad" if first[0] <= first[1] else "orb"
    idx = min(first)
    values, limits = (E_rad, lim_rad) if term == "rad" else (E_orb, lim_orb)
    raise ModelRejectionError(term, idx, float(values[idx]), float(limits[idx]))


def eval_error(model: ErrorModel, profile: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (E_rad, E_orb) on the profile grid.

    Raises:
        ModelRejectionError: A custom model is negative or above its bound;
            the error carries the first violating index.
    """
    F = profile.F_values
    if model.kind == "zero":
        return np.zeros_like(F), np.zeros_like(F)
    if model.kind == "default":
        R_mod = 2.0 / (2.0 + F**2)
        return model.c_rad * R_mod**2, model.c_orb * F**2 * R_mod**2

    E_rad, E_orb = (np.asarray(e, dtype=float) for e in model.func(profile))
    if E_rad.shape != F.shape or E_orb.shape != F.shape:
        raise ValidationError("custom error model returned arrays of the wrong shape")
    _check_model_output(model, F, E_rad, E_orb)
    return E_rad, E_orb


# ----------------------------
# Right-hand side
# ----------------------------

def origin_index(z: np.ndarray) -> int:
    """Index of the z = 0 node."""
    hits = np.flatnonzero(z == 0.0)
    if len(hits) == 0:
        raise ConfigError("z = 0 must be a grid node", ["grid"])
    return int(hits[0])


def integral_from_origin(values: np.ndarray, z: np.ndarray, i0: int) -> np.ndarray:
    """Trapezoid ∫₀^z values dζ, accumulated outward from the node i0."""
    out = np.empty_like(values)
    out[i0:] = cumulative_trapezoid(values[i0:], z[i0:], initial=0.0)
    out[: i0 + 1] = cumulative_trapezoid(values[i0::-1], z[i0::-1], initial=0.0)[::-1]
    return out


def _open_rhs(z, F, F_z, F_zz, E_rad, E_orb, i0):
    J = integral_from_origin(F_z**2 / F**2, z, i0)
    I_E = integral_from_origin(E_rad, z, i0)
    anchor = F_z[i0] / F[i0]
    minus_F_s = F_zz - (1.0 + F_z**2) / F + 2.0 * F_z * (anchor - J) - E_orb / F + F_z * I_E
    return -minus_F_s


def rhs(profile: RadialProfile, model: ErrorModel) -> np.ndarray:
    """F_s on the grid; tips of a closed profile carry NaN.

    Raises:
        ConfigError: z = 0 is not a grid node.
        ValidationError: Degenerate grid or F <= 0 at an interior point.
    """
    profile.validate()
    i0 = origin_index(profile.z_grid)
    out = np.full(len(profile), np.nan)
    sl = slice(1, -1) if profile.closed else slice(None)
    z = profile.z_grid[sl]
    F = profile.F_values[sl]
    F_z, F_zz = finite_differences(z, F)
    E_rad, E_orb = eval_error(model, profile)
    out[sl] = _open_rhs(z, F, F_z, F_zz, E_rad[sl], E_orb[sl], i0 - (1 if profile.closed else 0))
    return out


# ----------------------------
# Grids and seeds
# ----------------------------

def _two_sided(z_left: float, z_right: float, m: int) -> np.ndarray:
    right = z_right * (np.arange(m + 1) / m)
    left = z_left * (np.arange(m + 1) / m)
    return np.concatenate([left[:0:-1], right])


def two_sided_grid(zmax: float, n: int) -> np.ndarray:
    """Uniform grid on [-zmax, zmax] with 2*(n//2)+1 nodes, z = 0 at the center.

    The left half is the exact mirror of the right half.
    """
    m = n // 2
    if m < 5:
        raise ConfigError(f"grid needs n >= 10, got {n}", ["grid.n"])
    right = zmax * (np.arange(m + 1) / m)
    return np.concatenate([-right[:0:-1], right])


def cylinder(s: float, zmax: float, n: int) -> RadialProfile:
    z = two_sided_grid(zmax, n)
    return RadialProfile(z, np.full_like(z, math.sqrt(2 * s)), s)


def sphere(s: float, n: int) -> RadialProfile:
    """Round profile of radius √(2s), reference point on the equator."""
    rho = math.sqrt(2 * s)
    z = two_sided_grid(0.5 * math.pi * rho, n)
    F = rho * np.cos(z / rho)
    F[0] = F[-1] = 0.0
    return RadialProfile(z, F, s, closed=True)


def neutral_ansatz(s: float, L: float, n: int, cap: str = "none", bryant=None) -> RadialProfile:
    """Cylindrical expansion on |z| <= L√s, optionally closed by Bryant caps.

    Args:
        s: Level-set parameter, at least e².
        L: Half width of the ansatz region in units of √s.
        n: Grid size (2*(n//2)+1 nodes).
        cap: ``"none"`` for an open profile, ``"bryant"`` for scaled caps.
        bryant: Optional precomputed BryantProfile for the caps.
    """
    from solab.asymptotics import cylindrical_expansion, cylindrical_slope

    zj = L * math.sqrt(s)
    if cap == "none":
        z = two_sided_grid(zj, n)
        return RadialProfile(z, cylindrical_expansion(s, z, L=L), s)
    if cap != "bryant":
        raise ConfigError(f"unknown cap '{cap}'", ["flow.cap"])

    from solab.bryant import bryant_cap, solve_bryant

    F_j = float(cylindrical_expansion(s, zj, L=L))
    slope = abs(float(cylindrical_slope(s, zj)))
    cap_fn, length = bryant_cap(bryant or solve_bryant(), slope, F_j)
    z = two_sided_grid(zj + length, n)
    inner = np.abs(z) <= zj
    F = np.where(inner, cylindrical_expansion(s, np.where(inner, z, 0.0), L=np.inf), 0.0)
    F[~inner] = cap_fn(np.abs(z[~inner]) - zj)
    F[0] = F[-1] = 0.0
    return RadialProfile(z, F, s, closed=True)


# ----------------------------
# Tip closure
# ----------------------------

@dataclass(frozen=True)
class Closure:
    """Near-tip treatment: nodes with F < cells*Δz are filled by a quadratic."""

    cells: float = 3.0
    regrid_fraction: float = 0.1


def grid_spacing(z: np.ndarray) -> float:
    return float(np.min(np.diff(z)))


def core_bounds(profile: RadialProfile, cells: float) -> tuple[int, int]:
    """Inclusive index range of the core around z = 0."""
    n = len(profile)
    if not profile.closed:
        return 0, n - 1
    F = profile.F_values
    i0 = origin_index(profile.z_grid)
    thresh = cells * grid_spacing(profile.z_grid)
    kl = i0
    while kl > 0 and F[kl - 1] >= thresh:
        kl -= 1
    kr = i0
    while kr < n - 1 and F[kr + 1] >= thresh:
        kr += 1
    if kr - kl < 9:
        raise ValidationError(f"core around z = 0 has only {kr - kl + 1} nodes above the closure radius")
    return kl, kr


def _edge_slopes(z, F, kl, kr):
    core_z, core_F = z[kl : kr + 1], F[kl : kr + 1]
    F_z, _ = finite_differences(core_z, core_F)
    return F_z[0], F_z[-1]


def tip_extent(F_k: float, slope: float) -> float:
    """Distance from the core edge to the zero of the quadratic that matches
    value and slope there and closes with |F_z| = 1."""
    return 2.0 * F_k / (1.0 + min(abs(slope), 1.0))


def apply_closure(z: np.ndarray, F: np.ndarray, kl: int, kr: int) -> np.ndarray:
    """Refill the near-tip nodes outside [kl, kr]; endpoints become 0."""
    F = F.copy()
    s_l, s_r = _edge_slopes(z, F, kl, kr)
    for k, slope, part in ((kl, s_l, slice(0, kl)), (kr, s_r, slice(kr + 1, None))):
        end = z[0] if part.start == 0 else z[-1]
        L = end - z[k]
        if L == 0:
            continue
        q = -(F[k] + slope * L) / L**2
        d = z[part] - z[k]
        F[part] = F[k] + slope * d + q * d**2
    F[0] = F[-1] = 0.0
    return F


def regrid(
    profile: RadialProfile, kl: int, kr: int, z_left: float, z_right: float, cells: float = 3.0
) -> RadialProfile:
    """Uniform two-sided grid between new tip positions, monotone (PCHIP) transfer of the core."""
    z, F = profile.z_grid, profile.F_values
    i0 = origin_index(z)
    m = i0
    new_z = _two_sided(z_left, z_right, m)
    s_l, s_r = _edge_slopes(z, F, kl, kr)
    core = PchipInterpolator(z[kl : kr + 1], F[kl : kr + 1], extrapolate=False)
    new_F = core(new_z)
    for k, slope, mask, end in (
        (kl, s_l, new_z < z[kl], z_left),
        (kr, s_r, new_z > z[kr], z_right),
    ):
        L = end - z[k]
        q = -(F[k] + slope * L) / L**2
        d = new_z[mask] - z[k]
        new_F[mask] = F[k] + slope * d + q * d**2
    new_F[0] = new_F[-1] = 0.0
    log.debug("regrid at s=%g: tips [%g, %g] -> [%g, %g]", profile.s, z[0], z[-1], z_left, z_right)
    out = RadialProfile(new_z, new_F, profile.s, closed=True)
    kl2, kr2 = core_bounds(out, cells)
    return out.with_values(apply_closure(new_z, new_F, kl2, kr2))


# ----------------------------
# Time stepping
# ----------------------------

def stable_step(profile: RadialProfile, safety: float = 0.2, cells: float = 3.0) -> float:
    """Largest admissible step, returned negative: -c Δz² min(1, min F over the core)."""
    kl, kr = core_bounds(profile, cells)
    dz = grid_spacing(profile.z_grid)
    f_min = float(np.min(profile.F_values[kl : kr + 1]))
    return -safety * dz**2 * min(1.0, f_min)


def _stage_rhs(z, F, kl, kr, i0, model, s):
    core_F = F[kl : kr + 1]
    if np.any(core_F <= 0):
        bad = kl + int(np.argmin(core_F))
        raise SingularityError(s, float(z[bad]))
    core = RadialProfile(z[kl : kr + 1], core_F, s)
    F_z, F_zz = finite_differences(core.z_grid, core_F)
    E_rad, E_orb = eval_error(model, core)
    out = np.zeros_like(F)
    out[kl : kr + 1] = _open_rhs(core.z_grid, core_F, F_z, F_zz, E_rad, E_orb, i0 - kl)
    return out


def step(
    state: RadialProfile,
    model: ErrorModel,
    ds: float,
    *,
    safety: float = 0.2,
    closure: Closure = Closure(),
) -> RadialProfile:
    """One classical RK4 step from s to s + ds (ds < 0).

    Raises:
        DirectionError: ds >= 0.
        StepSizeError: |ds| above the stability bound.
        SingularityError: F reached 0 inside the core (neck pinch).
    """
    if not ds < 0:
        raise DirectionError(f"the flow is integrated with ds < 0, got ds = {ds}")
    state.validate()
    bound = stable_step(state, safety, closure.cells)
    if abs(ds) > abs(bound) * (1 + 1e-12):
        raise StepSizeError(ds, abs(bound))

    z, s = state.z_grid, state.s
    i0 = origin_index(z)
    kl, kr = core_bounds(state, closure.cells)

    def close(F):
        return apply_closure(z, F, kl, kr) if state.closed else F

    F0 = state.F_values
    k1 = _stage_rhs(z, F0, kl, kr, i0, model, s)
    k2 = _stage_rhs(z, close(F0 + 0.5 * ds * k1), kl, kr, i0, model, s + 0.5 * ds)
    k3 = _stage_rhs(z, close(F0 + 0.5 * ds * k2), kl, kr, i0, model, s + 0.5 * ds)
    k4 = _stage_rhs(z, close(F0 + ds * k3), kl, kr, i0, model, s + ds)
    F1 = close(F0 + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))

    core_F = F1[kl : kr + 1]
    if np.any(core_F <= 0):
        bad = kl + int(np.argmin(core_F))
        raise SingularityError(s + ds, float(z[bad]))

    new = state.with_values(F1, s + ds)
    if not state.closed:
        return new

    s_l, s_r = _edge_slopes(z, F1, kl, kr)
    z_left = z[kl] - tip_extent(F1[kl], s_l)
    z_right = z[kr] + tip_extent(F1[kr], s_r)
    drift = max(abs(z_left - z[0]), abs(z_right - z[-1]))
    if drift > closure.regrid_fraction * grid_spacing(z):
        return regrid(new, kl, kr, z_left, z_right, closure.cells)
    return new


# ----------------------------
# Trajectories
# ----------------------------

@dataclass(frozen=True)
class FlowTrajectory:
    """Snapshots of a run in the integration direction (s decreasing)."""

    snapshots: tuple[RadialProfile, ...]
    s_values: np.ndarray
    tip_distances: tuple[tuple[float, float] | None, ...]
    error_model: ErrorModel
    status: str = "complete"
    singularity: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        s = np.asarray(self.s_values, dtype=float)
        object.__setattr__(self, "s_values", s)
        if len(s) != len(self.snapshots):
            raise ValidationError("one s value per snapshot required")
        if len(s) > 1 and np.any(np.diff(s) >= 0):
            raise ValidationError("s_values must decrease strictly")

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def r_max(self) -> np.ndarray:
        return np.array([float(np.max(p.F_values)) for p in self.snapshots])

    @property
    def closed(self) -> bool:
        return bool(self.snapshots) and self.snapshots[0].closed


def tip_distances(profile: RadialProfile) -> tuple[float, float] | None:
    """Distances from the reference point z = 0 to both tips."""
    if not profile.closed:
        return None
    return float(-profile.z_grid[0]), float(profile.z_grid[-1])


def integrate(
    seed: RadialProfile,
    model: ErrorModel,
    s_targets: Sequence[float],
    *,
    ds: float | None = None,
    safety: float = 0.2,
    closure: Closure = Closure(),
) -> FlowTrajectory:
    """Integrate from ``seed.s`` through decreasing ``s_targets``.

    The first target must equal the seed's s. Steps are split evenly so every
    snapshot lands exactly on its target. A neck pinch ends the run with
    status ``"singularity"`` and the snapshots gathered so far.
    """
    targets = np.asarray(s_targets, dtype=float)
    if len(targets) < 1 or targets[0] != seed.s:
        raise ConfigError("first snapshot target must equal the seed's s", ["flow.s1"])
    if np.any(np.diff(targets) >= 0):
        raise ConfigError("snapshot targets must decrease (s0 < s1)", ["flow.s0", "flow.s1"])
    if ds is not None and not ds < 0:
        raise DirectionError(f"the flow is integrated with ds < 0, got ds = {ds}")

    state = seed.validate()
    snaps = [state]
    clamped = False
    for target in targets[1:]:
        try:
            while state.s > target:
                limit = stable_step(state, safety, closure.cells)
                if ds is None:
                    h = max(limit, -MAX_RELATIVE_STEP * state.s)
                else:
                    h = max(ds, limit)
                    if h != ds and not clamped:
                        log.warning("ds = %g exceeds the stability limit %g at s=%g; clamping", ds, limit, state.s)
                        clamped = True
                n_sub = max(1, math.ceil((state.s - target) / abs(h) - 1e-9))
                h = (target - state.s) / n_sub
                state = step(state, model, h, safety=safety, closure=closure)
                if n_sub == 1:
                    state = RadialProfile(state.z_grid, state.F_values, target, state.closed)
        except SingularityError as exc:
            log.warning("run stopped: %s", exc)
            return _trajectory(snaps, model, "singularity", (exc.s, exc.z))
        snaps.append(state)
    return _trajectory(snaps, model)


def _trajectory(snaps, model, status="complete", singularity=None) -> FlowTrajectory:
    return FlowTrajectory(
        snapshots=tuple(snaps),
        s_values=np.array([p.s for p in snaps]),
        tip_distances=tuple(tip_distances(p) for p in snaps),
        error_model=model,
        status=status,
        singularity=singularity,
    )


def error_model_from_config(cfg) -> ErrorModel:
    return ErrorModel(kind=cfg.model, c_rad=cfg.c_rad, c_orb=cfg.c_orb)


def seed_from_config(config) -> RadialProfile:
    """Build the seed profile named by ``flow.seed_profile``."""
    flow, grid = config.flow, config.grid
    s1 = flow.s1
    kind = flow.seed_profile
    if kind == "cylinder":
        zmax = 4.0 * math.sqrt(s1) if grid.zmax == "auto" else float(grid.zmax)
        return cylinder(s1, zmax, grid.n)
    if kind == "sphere":
        return sphere(s1, grid.n)
    if kind == "neutral_ansatz":
        return neutral_ansatz(s1, flow.ansatz_L, grid.n, cap=flow.cap)
    if kind == "file":
        from solab.io import read_snapshot

        if not flow.seed_file:
            raise ConfigError("seed_profile = file needs flow.seed_file", ["flow.seed_file"])
        seed = read_snapshot(flow.seed_file)
        return RadialProfile(seed.z_grid, seed.F_values, s1, seed.closed)
    raise ConfigError(f"unknown seed profile '{kind}'", ["flow.seed_profile"])


def run(config) -> FlowTrajectory:
    """Run the flow described by a validated RunConfig."""
    flow = config.flow
    if not flow.s0 < flow.s1:
        raise ConfigError(f"flow.s0 ({flow.s0}) must be below flow.s1 ({flow.s1})", ["flow.s0", "flow.s1"])
    seed = seed_from_config(config)
    targets = np.linspace(flow.s1, flow.s0, flow.snapshots)
    targets[0], targets[-1] = flow.s1, flow.s0
    log.info("running %s seed from s=%g to s=%g (%d snapshots)", flow.seed_profile, flow.s1, flow.s0, flow.snapshots)
    return integrate(
        seed,
        error_model_from_config(config.error),
        targets,
        ds=None if flow.ds == "auto" else -abs(float(flow.ds)),
        safety=flow.step_safety,
        closure=Closure(config.grid.closure_cells, flow.regrid_fraction),
    )


# ----------------------------
# A posteriori checks
# ----------------------------

@dataclass(frozen=True)
class PdeResidual:
    """Residual of (F_{j+1} - F_{j-1})/Δs against Simpson-weighted F_s."""

    s_values: np.ndarray
    sup: np.ndarray
    l2: np.ndarray
    relative: np.ndarray


def resample(src: RadialProfile, values: np.ndarray, z: np.ndarray) -> np.ndarray:
    if len(src.z_grid) == len(z) and np.array_equal(src.z_grid, z):
        return values
    finite = np.isfinite(values)
    return CubicSpline(src.z_grid[finite], values[finite], extrapolate=False)(z)


def pde_residual(
    trajectory: FlowTrajectory,
    region: Callable[[RadialProfile], np.ndarray] | None = None,
    closure: Closure = Closure(),
) -> PdeResidual:
    """Per interior snapshot, sup and L² of the time-difference residual.

    Args:
        trajectory: At least three snapshots.
        region: Optional mask function restricting the points measured.
        closure: Nodes outside the closure core are skipped.

    Raises:
        InsufficientDataError: Fewer than three snapshots.
    """
    snaps = trajectory.snapshots
    if len(snaps) < 3:
        raise InsufficientDataError(f"pde_residual needs at least 3 snapshots, got {len(snaps)}")
    model = trajectory.error_model
    rates = [rhs(p, model) for p in snaps]

    s_out, sups, l2s, rels = [], [], [], []
    for j in range(1, len(snaps) - 1):
        here = snaps[j]
        z = here.z_grid
        kl, kr = core_bounds(here, closure.cells)
        mask = np.zeros(len(z), dtype=bool)
        mask[kl + 1 : kr] = True
        if region is not None:
            mask &= region(here)
        prev_F = resample(snaps[j - 1], snaps[j - 1].F_values, z)
        next_F = resample(snaps[j + 1], snaps[j + 1].F_values, z)
        f0 = resample(snaps[j - 1], rates[j - 1], z)
        f2 = resample(snaps[j + 1], rates[j + 1], z)
        f1 = rates[j]
        h1 = here.s - snaps[j - 1].s
        h2 = snaps[j + 1].s - here.s
        simpson = ((2 - h2 / h1) * f0 + (h1 + h2) ** 2 / (h1 * h2) * f1 + (2 - h1 / h2) * f2) / 6.0
        res = (next_F - prev_F) / (h1 + h2) - simpson
        mask &= np.isfinite(res)
        if not mask.any():
            raise InsufficientDataError(f"no comparable points at s = {here.s}")
        r = np.abs(res[mask])
        s_out.append(here.s)
        sups.append(float(np.max(r)))
        l2s.append(float(math.sqrt(trapezoid(res[mask] ** 2, z[mask]))) if mask.sum() > 1 else float(r[0]))
        rels.append(float(np.max(r) / max(np.max(np.abs(f1[mask])), np.finfo(float).tiny)))
    return PdeResidual(np.array(s_out), np.array(sups), np.array(l2s), np.array(rels))


@dataclass(frozen=True)
class RmaxBound:
    """Smallest C with r_max² >= 2s - C, and the upper slack per snapshot."""

    C: float
    slack: np.ndarray


def r_max_bound_fit(trajectory: FlowTrajectory) -> RmaxBound:
    r2 = trajectory.r_max**2
    s = trajectory.s_values
    C = max(0.0, float(np.max(2 * s - r2)))
    return RmaxBound(C, r2 / (2 * s) - 1.0)


def regime_series(trajectory: FlowTrajectory) -> list[RegimeReport]:
    return [regime_check(p) for p in trajectory.snapshots]
