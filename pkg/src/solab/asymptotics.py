"""
Closed-form predictors for the three asymptotic regions and verifiers that
compare them with simulated trajectories.

Asymptotic statements are checked as trends over the simulated window. Every
verifier fits its own constant and reports how stable it is instead of
asserting a value.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import trapezoid

from solab.errors import ConfigError, InsufficientDataError, ValidationError
from solab.levelset_flow import (
    Closure,
    ErrorModel,
    FlowTrajectory,
    core_bounds,
    eval_error,
    integral_from_origin,
    origin_index,
    resample,
)
from solab.warped_geometry import RadialProfile, finite_differences, scalar_curvature

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
NO_DEVIATION = 1e-12
STABILITY_SPREAD = 0.5
SLOPE_TOL = 0.05


@dataclass(frozen=True)
class RegionParams:
    """Constants of the region statements.

    ``C_theta`` is left as None when a verifier should fit it; ``alpha`` is
    left as None when it should come from star_condition_fit.
    """

    theta: float = 0.25
    M: float = 20.0
    L: float = 4.0
    C_theta: float | None = None
    eta: float = 0.9
    alpha: float | None = None
    gamma: float = 1.0

    def __post_init__(self) -> None:
        checks = [
            ("asymptotics.theta", 0 < self.theta < 0.5, "theta must lie in (0, 1/2)"),
            ("asymptotics.M", self.M >= 20, "M must be at least 20"),
            ("asymptotics.L", self.L >= 1, "L must be at least 1"),
            ("asymptotics.eta", 1 / 3 < self.eta < 1, "eta must lie in (1/3, 1)"),
            ("asymptotics.gamma", self.gamma > 0, "gamma must be positive"),
        ]
        bad = [(key, msg) for key, ok, msg in checks if not ok]
        if self.C_theta is not None and self.C_theta < 0:
            bad.append(("asymptotics.C_theta", "C_theta must be nonnegative"))
        if bad:
            raise ConfigError("; ".join(msg for _, msg in bad), [key for key, _ in bad])


# ----------------------------
# Predictors
# ----------------------------

def cylindrical_expansion(s: float, z, L: float = 4.0):
    """F ≈ √(2s) - (z² - 2s) / (4√2 log s √s) on |z| <= L√s.

    Points outside the region are evaluated anyway and reported with a
    warning; pass ``L=np.inf`` to silence it.

    Raises:
        ValidationError: s < e².
    """
    if not s >= math.exp(2) * (1 - 1e-12):
        raise ValidationError(f"cylindrical expansion needs s >= e^2, got {s}")
    z = np.asarray(z, dtype=float)
    outside = np.abs(z) > L * math.sqrt(s) * (1 + 1e-12)
    if np.any(outside):
        log.warning("cylindrical expansion evaluated outside |z| <= %g sqrt(s) at %d points", L, int(outside.sum()))
    root = math.sqrt(s)
    F = SQRT2 * root - (z**2 - 2 * s) / (4 * SQRT2 * math.log(s) * root)
    return F if F.ndim else float(F)


def cylindrical_slope(s: float, z):
    """z-derivative of the cylindrical expansion."""
    return -np.asarray(z, dtype=float) / (2 * SQRT2 * math.sqrt(s) * math.log(s))


def rescaled_neutral_profile(xi, tau: float):
    """G(ξ, τ) = -(ξ² - 2) / (4√2 |τ|), the neutral mode in rescaled variables."""
    return -(np.asarray(xi, dtype=float) ** 2 - 2) / (4 * SQRT2 * abs(tau))


def f_squared_corollary(s: float, z):
    """Intermediate-region law F² ≈ 2s - z² / (2 log s)."""
    return 2 * s - np.asarray(z, dtype=float) ** 2 / (2 * math.log(s))


def intermediate_bounds(s: float, z, params: RegionParams, C_theta: float | None = None):
    """Lower and upper bounds for F² on z >= M√s.

    Raises:
        ValidationError: A point lies inside |z| < M√s.
    """
    C = params.C_theta if C_theta is None else C_theta
    C = 0.0 if C is None else C
    if C < 0:
        raise ConfigError("C_theta must be nonnegative", ["asymptotics.C_theta"])
    z = np.asarray(z, dtype=float)
    M2 = params.M**2
    inside = np.abs(z) < params.M * math.sqrt(s) * (1 - 1e-12)
    if np.any(inside):
        raise ValidationError(
            f"point outside the intermediate region |z| >= {params.M:g} sqrt(s)",
            int(np.flatnonzero(np.atleast_1d(inside))[0]),
        )
    q = z**2 / (2 * math.log(s))
    lower = 2 * s - (M2 + C) / (M2 - 2) * q
    upper = 2 * s - (M2 - C) / M2 * q
    return lower, upper


def support_interval(theta: float, s: float) -> tuple[float, float]:
    """Predicted (z̄₁, z̄₂), where F² first drops to 2θ²s."""
    if not 0 <= theta < 1:
        raise ValidationError(f"theta must lie in [0, 1), got {theta}")
    half = 2 * math.sqrt(1 - theta**2) * math.sqrt(s * math.log(s))
    return -half, half


@dataclass(frozen=True)
class TipPrediction:
    d_tip: float
    R_tip: float


def tip_predictions(s: float) -> TipPrediction:
    """d_tip ≈ 2√(s log s) and R_tip ≈ log s / s."""
    if not s > 1:
        raise ValidationError(f"tip predictions need s > 1, got {s}")
    return TipPrediction(2 * math.sqrt(s * math.log(s)), math.log(s) / s)


def positive_mode_prediction(tau):
    """a₀(τ) = -τ e^τ / √2 for the positive-mode branch.

    Raises:
        ValidationError: τ >= 0.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau >= 0):
        raise ValidationError("tau must be negative")
    a0 = -tau * np.exp(tau) / SQRT2
    return a0 if a0.ndim else float(a0)


# ----------------------------
# Tip measurements
# ----------------------------

def tip_curvature_estimate(profile: RadialProfile, side: str = "right", cells: float = 3.0) -> float:
    """Scalar curvature extrapolated to a tip.

    Quadratic through R̄ at the three core nodes nearest the tip, evaluated at
    the tip.

    Raises:
        InsufficientDataError: Open profile or too few core nodes.
    """
    if not profile.closed:
        raise InsufficientDataError("open profile has no tip")
    try:
        kl, kr = core_bounds(profile, cells)
    except ValidationError as exc:
        raise InsufficientDataError(str(exc)) from exc
    R = scalar_curvature(profile)
    z = profile.z_grid
    idx = np.arange(kr - 2, kr + 1) if side == "right" else np.arange(kl, kl + 3)
    tip = z[-1] if side == "right" else z[0]
    coeffs = np.polyfit(z[idx] - tip, R[idx], 2)
    return float(coeffs[-1])


@dataclass(frozen=True)
class TipReport:
    """Measured tip distances and curvatures against the predictors."""

    s_values: np.ndarray
    d_tip1: np.ndarray
    d_tip2: np.ndarray
    R_tip1: np.ndarray
    R_tip2: np.ndarray
    d_pred: np.ndarray
    R_pred: np.ndarray

    @property
    def d_rel_error(self) -> np.ndarray:
        return np.maximum(np.abs(self.d_tip1 / self.d_pred - 1), np.abs(self.d_tip2 / self.d_pred - 1))

    @property
    def R_rel_error(self) -> np.ndarray:
        return np.maximum(np.abs(self.R_tip1 / self.R_pred - 1), np.abs(self.R_tip2 / self.R_pred - 1))


def tip_report(trajectory: FlowTrajectory, cells: float = 3.0) -> TipReport:
    """Tip distances and extrapolated tip curvatures per snapshot.

    Raises:
        InsufficientDataError: The trajectory is open.
    """
    if not trajectory.closed:
        raise InsufficientDataError("tip report needs a closed trajectory")
    rows = []
    for profile, dists in zip(trajectory.snapshots, trajectory.tip_distances):
        pred = tip_predictions(profile.s)
        rows.append((
            profile.s,
            dists[0],
            dists[1],
            tip_curvature_estimate(profile, "left", cells),
            tip_curvature_estimate(profile, "right", cells),
            pred.d_tip,
            pred.R_tip,
        ))
    cols = np.array(rows, dtype=float).T
    return TipReport(*cols)


@dataclass(frozen=True)
class DiameterSeries:
    s_values: np.ndarray
    diameter: np.ndarray


def diameter_series(trajectory: FlowTrajectory) -> DiameterSeries:
    """d_tip1 + d_tip2 per snapshot of a closed trajectory."""
    if not trajectory.closed:
        raise InsufficientDataError("diameter series needs a closed trajectory")
    return DiameterSeries(
        np.asarray(trajectory.s_values, dtype=float),
        np.array([a + b for a, b in trajectory.tip_distances]),
    )


# ----------------------------
# Trajectory verifiers
# ----------------------------

@dataclass(frozen=True)
class StarFit:
    """Fit of r_max²/(2s) - 1 = c s^(-α)."""

    status: str
    alpha: float | None = None
    c: float | None = None
    alpha_stderr: float | None = None
    residual: float = 0.0


def star_condition_fit(trajectory: FlowTrajectory) -> StarFit:
    """Log-log regression of the relative excess of r_max² over 2s.

    A trajectory without excess reports ``"no deviation"``.

    Raises:
        InsufficientDataError: Fewer than two snapshots with positive excess.
    """
    s = np.asarray(trajectory.s_values, dtype=float)
    y = trajectory.r_max**2 / (2 * s) - 1.0
    if np.all(np.abs(y) <= NO_DEVIATION):
        return StarFit("no deviation", residual=float(np.max(np.abs(y), initial=0.0)))
    keep = y > NO_DEVIATION
    if keep.sum() < 2:
        raise InsufficientDataError("star condition fit needs two snapshots with r_max^2 > 2s")
    x, v = np.log(s[keep]), np.log(y[keep])
    if keep.sum() > 3:
        coeffs, cov = np.polyfit(x, v, 1, cov=True)
        stderr = float(math.sqrt(cov[0, 0]))
    else:
        coeffs, stderr = np.polyfit(x, v, 1), None
    residual = float(np.max(np.abs(np.polyval(coeffs, x) - v)))
    return StarFit("fitted", float(-coeffs[0]), float(math.exp(coeffs[1])), stderr, residual)


@dataclass(frozen=True)
class FzDecay:
    """Minimal C with F_z² <= C s^(-γα) on {F >= √s}, per snapshot."""

    s_values: np.ndarray
    C_values: np.ndarray
    exponent: float
    passed: bool

    @property
    def C(self) -> float:
        return float(np.max(self.C_values, initial=0.0))


def fz_decay_check(trajectory: FlowTrajectory, params: RegionParams, alpha: float | None = None) -> FzDecay:
    """Fit the F_z decay constant and check that it stays bounded.

    The check passes when every C is zero or when all C values lie within
    a factor 1 + STABILITY_SPREAD of each other.
    """
    alpha = params.alpha if alpha is None else alpha
    if alpha is None:
        fit = star_condition_fit(trajectory)
        alpha = fit.alpha if fit.alpha is not None else 1.0
    exponent = params.gamma * alpha
    s_vals, C_vals = [], []
    for profile in trajectory.snapshots:
        z, F = profile.z_grid, profile.F_values
        F_z, _ = finite_differences(z, F)
        region = F >= math.sqrt(profile.s)
        if profile.closed:
            region[[0, -1]] = False
        if not region.any():
            continue
        s_vals.append(profile.s)
        C_vals.append(float(np.max(F_z[region] ** 2)) * profile.s**exponent)
    C_arr = np.array(C_vals)
    if len(C_arr) == 0:
        raise InsufficientDataError("no snapshot has points with F >= sqrt(s)")
    top = float(C_arr.max())
    passed = top <= NO_DEVIATION or float(C_arr.min()) * (1 + STABILITY_SPREAD) >= top
    return FzDecay(np.array(s_vals), C_arr, exponent, bool(passed))


def htilde_source(profile: RadialProfile, model: ErrorModel, base: int | None = None) -> np.ndarray:
    """Source S of -H̃_s - H̃_zz = -S for H̃ = F²/2 - s.

    S = 2F_z² - 2FF_z((F_z/F)(0) - ∫₀^z F_z²/F²) + E_orb - FF_z ∫₀^z E_rad,
    with integrals based at grid node ``base`` (default: the node at z = 0).
    Tips of a closed profile carry NaN.
    """
    profile.validate()
    z, F = profile.z_grid, profile.F_values
    i0 = origin_index(z) if base is None else base
    E_rad, E_orb = eval_error(model, profile)
    sl = slice(1, -1) if profile.closed else slice(None)
    shift = 1 if profile.closed else 0
    zs, Fs = z[sl], F[sl]
    F_z, _ = finite_differences(zs, Fs)
    j0 = i0 - shift
    J = integral_from_origin(F_z**2 / Fs**2, zs, j0)
    I_E = integral_from_origin(E_rad[sl], zs, j0)
    out = np.full(len(z), np.nan)
    out[sl] = 2 * F_z**2 - 2 * Fs * F_z * (F_z[j0] / Fs[j0] - J) + E_orb[sl] - Fs * F_z * I_E
    return out


@dataclass(frozen=True)
class HtildeResidual:
    s_values: np.ndarray
    sup: np.ndarray
    l2: np.ndarray


def htilde_residual(trajectory: FlowTrajectory, base: float = 0.0, closure: Closure = Closure()) -> HtildeResidual:
    """Residual of -H̃_s - H̃_zz + S on interior snapshots.

    H̃_s is the centered difference across neighbouring snapshots, brought
    onto the middle snapshot's grid.

    Raises:
        InsufficientDataError: Fewer than three snapshots.
        ValidationError: ``base`` is not a grid node.
    """
    snaps = trajectory.snapshots
    if len(snaps) < 3:
        raise InsufficientDataError(f"htilde_residual needs at least 3 snapshots, got {len(snaps)}")
    model = trajectory.error_model
    s_out, sups, l2s = [], [], []
    for j in range(1, len(snaps) - 1):
        here = snaps[j]
        z = here.z_grid
        hits = np.flatnonzero(np.isclose(z, base, rtol=0, atol=1e-12 * max(1.0, abs(base))))
        if len(hits) == 0:
            raise ValidationError(f"base point z = {base} is not a grid node")
        H = {k: 0.5 * resample(snaps[k], snaps[k].F_values, z) ** 2 - snaps[k].s for k in (j - 1, j + 1)}
        H_s = (H[j + 1] - H[j - 1]) / (snaps[j + 1].s - snaps[j - 1].s)
        _, H_zz = finite_differences(z, 0.5 * here.F_values**2 - here.s)
        res = -H_s - H_zz + htilde_source(here, model, int(hits[0]))
        kl, kr = core_bounds(here, closure.cells)
        mask = np.zeros(len(z), dtype=bool)
        mask[kl + 1 : kr] = True
        mask &= np.isfinite(res)
        if not mask.any():
            raise InsufficientDataError(f"no comparable points at s = {here.s}")
        r = res[mask]
        s_out.append(here.s)
        sups.append(float(np.max(np.abs(r))))
        l2s.append(float(np.sqrt(trapezoid(r**2, z[mask]))) if len(r) > 1 else float(abs(r[0])))
    return HtildeResidual(np.array(s_out), np.array(sups), np.array(l2s))


@dataclass(frozen=True)
class DominanceReport:
    """Diameter growth against the positive-mode lower bound and the decay upper bound."""

    slope: float
    eta: float
    lower_exponent: float
    upper_exponent: float
    excludes_positive: bool
    decay_consistent: bool


def dominance_exclusion_report(series: DiameterSeries, eta: float) -> DominanceReport:
    """Compare diameter growth with s^(5/6) and s^(1 - η/2).

    Positive-mode dominance would force diam >= c s^(5/6); curvature decay
    with exponent η caps it at C s^(1 - η/2). The fitted log-log slope
    decides which scenario the data rules out.

    Raises:
        InsufficientDataError: Fewer than two points.
    """
    s = np.asarray(series.s_values, dtype=float)
    d = np.asarray(series.diameter, dtype=float)
    if len(s) < 2:
        raise InsufficientDataError("dominance report needs at least two diameter samples")
    if not 0 < eta < 1:
        raise ValidationError(f"eta must lie in (0, 1), got {eta}")
    slope = float(np.polyfit(np.log(s), np.log(d), 1)[0])
    lower, upper = 5.0 / 6.0, 1.0 - eta / 2
    report = DominanceReport(slope, eta, lower, upper, slope < lower - SLOPE_TOL, slope <= upper + SLOPE_TOL)
    if not report.decay_consistent:
        log.warning("diameter grows like s^%.3g, faster than the decay bound s^%.3g", slope, upper)
    return report


@dataclass(frozen=True)
class IntermediateCheck:
    C_fit: float
    n_points: int
    fraction_inside: float
    status: str


def intermediate_check(trajectory: FlowTrajectory, params: RegionParams) -> IntermediateCheck:
    """Fit the smallest C(θ) with every point of {|z| >= M√s, F > 0} between the bounds."""
    C_need = []
    pairs = []
    for profile in trajectory.snapshots:
        z, F, s = profile.z_grid, profile.F_values, profile.s
        sel = (np.abs(z) >= params.M * math.sqrt(s)) & (F > 0)
        if not sel.any():
            continue
        q = z[sel] ** 2 / (2 * math.log(s))
        D = 2 * s - F[sel] ** 2
        M2 = params.M**2
        C_need.append(np.max(np.maximum(D * (M2 - 2) / q - M2, M2 - D * M2 / q)))
        pairs.append((s, z[sel], F[sel] ** 2))
    if not pairs:
        return IntermediateCheck(0.0, 0, 1.0, "vacuous")
    C_fit = max(0.0, float(max(C_need)))
    C_use = C_fit if params.C_theta is None else params.C_theta
    inside = total = 0
    for s, z, F2 in pairs:
        lower, upper = intermediate_bounds(s, z, params, C_use)
        inside += int(np.sum((F2 >= lower * (1 + 1e-12) - 1e-12) & (F2 <= upper + 1e-12 * abs(upper))))
        total += len(z)
    frac = inside / total
    return IntermediateCheck(C_fit, total, frac, "pass" if frac == 1.0 else "warn")


# ----------------------------
# Consolidated verdict
# ----------------------------

@dataclass
class Check:
    name: str
    region: str
    status: str
    fitted_constants: dict[str, Any] = field(default_factory=dict)
    max_rel_error: float | None = None
    note: str = ""


@dataclass
class Verdict:
    checks: list[Check]
    overall: str

    @property
    def passed(self) -> bool:
        return self.overall.startswith("pass")

    def to_dict(self) -> dict[str, Any]:
        return {"overall": self.overall, "checks": [asdict(c) for c in self.checks]}


def _is_cylinder(trajectory: FlowTrajectory) -> bool:
    for p in trajectory.snapshots:
        target = math.sqrt(2 * p.s)
        if p.closed or np.max(np.abs(p.F_values - target)) > 1e-12 * target:
            return False
    return True


def _cylindrical_check(trajectory: FlowTrajectory, params: RegionParams) -> Check:
    errs, scale = [], []
    for p in trajectory.snapshots:
        if p.s < math.exp(2):
            continue
        sel = (np.abs(p.z_grid) <= params.L * math.sqrt(p.s)) & (p.F_values > 0)
        if not sel.any():
            continue
        pred = cylindrical_expansion(p.s, p.z_grid[sel], L=np.inf)
        errs.append(float(np.max(np.abs(p.F_values[sel] / pred - 1))))
        scale.append(1.0 / math.log(p.s))
    if not errs:
        return Check("cylindrical", "|z| <= L sqrt(s)", "warn", note="no snapshot with s >= e^2")
    worst = max(errs)
    ok = all(e <= c for e, c in zip(errs, scale))
    return Check("cylindrical", "|z| <= L sqrt(s)", "pass" if ok else "warn", max_rel_error=worst)


def verify_trajectory(
    trajectory: FlowTrajectory,
    params: RegionParams = RegionParams(),
    spectral_report=None,
    dichotomy_threshold: float = 0.5,
) -> Verdict:
    """Run every region check on a trajectory and collect the results.

    Checks that need a window of snapshots warn with ``"insufficient window"``
    when given fewer than three. The overall result is ``"pass"``,
    ``"pass (trivial regime)"`` for an exact cylinder, ``"warn"`` or ``"fail"``.
    """
    if len(trajectory) == 0:
        raise InsufficientDataError("empty trajectory")

    if _is_cylinder(trajectory):
        checks = [
            Check("cylindrical", "|z| <= L sqrt(s)", "pass", note="exact cylinder"),
            Check("star_condition", "r_max", "pass", note="no deviation"),
            Check("fz_decay", "F >= sqrt(s)", "pass", {"C": 0.0}),
            Check("intermediate", "|z| >= M sqrt(s)", "pass", note="vacuous"),
            Check("tip", "tips", "pass", note="vacuous"),
        ]
        return Verdict(checks, "pass (trivial regime)")

    checks = [_cylindrical_check(trajectory, params)]
    windowed = len(trajectory) >= 3

    alpha = params.alpha
    if windowed:
        try:
            fit = star_condition_fit(trajectory)
            checks.append(Check("star_condition", "r_max", "pass", {"alpha": fit.alpha, "c": fit.c, "alpha_stderr": fit.alpha_stderr}, note=fit.status))
            alpha = alpha if alpha is not None else fit.alpha
        except InsufficientDataError as exc:
            checks.append(Check("star_condition", "r_max", "warn", note=str(exc)))
        try:
            decay = fz_decay_check(trajectory, params, alpha if alpha is not None else 1.0)
            checks.append(Check("fz_decay", "F >= sqrt(s)", "pass" if decay.passed else "fail", {"C": decay.C, "gamma_alpha": decay.exponent}))
        except InsufficientDataError as exc:
            checks.append(Check("fz_decay", "F >= sqrt(s)", "warn", note=str(exc)))
    else:
        checks.append(Check("star_condition", "r_max", "warn", note="insufficient window"))
        checks.append(Check("fz_decay", "F >= sqrt(s)", "warn", note="insufficient window"))

    inter = intermediate_check(trajectory, params)
    checks.append(Check("intermediate", "|z| >= M sqrt(s)", inter.status if inter.status != "vacuous" else "pass",
                        {"C_theta": inter.C_fit}, note=inter.status if inter.status == "vacuous" else ""))

    if trajectory.closed:
        try:
            tips = tip_report(trajectory)
            checks.append(Check("tip", "tips", "pass", max_rel_error=float(np.max(tips.d_rel_error)),
                                fitted_constants={"R_rel_error": float(np.max(tips.R_rel_error))}))
        except InsufficientDataError as exc:
            checks.append(Check("tip", "tips", "warn", note=str(exc)))
        if windowed:
            dom = dominance_exclusion_report(diameter_series(trajectory), params.eta)
            checks.append(Check("dominance", "diameter", "pass" if dom.decay_consistent else "warn",
                                {"slope": dom.slope}, note="excludes positive-mode dominance" if dom.excludes_positive else ""))

    if spectral_report is not None:
        from solab.spectral import Dichotomy, dichotomy_classify

        label = dichotomy_classify(spectral_report, dichotomy_threshold).label
        status = "pass" if label is Dichotomy.NEUTRAL else "warn"
        checks.append(Check("dichotomy", "spectral", status, note=label.value))

    statuses = {c.status for c in checks}
    overall = "fail" if "fail" in statuses else "warn" if "warn" in statuses else "pass"
    return Verdict(checks, overall)


def region_params_from_config(cfg) -> RegionParams:
    return RegionParams(theta=cfg.theta, M=cfg.M, L=cfg.L, eta=cfg.eta, gamma=cfg.gamma)
