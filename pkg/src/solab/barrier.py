"""
Barrier functions for the F_z bound and the u-variable comparison.

A barrier ψ_a lives on [r_* a⁻¹, 1 + a⁻²/100] in the coordinate
x = F/√(2s) and must satisfy

    P[ψ] = ψψ'' - ½ψ'² + x⁻²(1 - ψ)(xψ' + 2ψ) - xψ'
         <= -¼ a⁻⁴ x⁻⁵   on [N a⁻¹, 1 + a⁻²/100]
         <= -½ a         on [r_* a⁻¹, N a⁻¹]

together with five pointwise bounds. Away from the tip ψ_a is the
two-term expansion in b = a⁻² of the outer solution. Near the tip,
construct_barrier shoots forward in t = a x from ψ(r_*) = TIP_VALUE and
tunes the initial slope so the shot lands on the expansion at
t = T_MATCH. Backward shooting from the right end is unstable. The
verify_barrier function is the authority on whether a candidate is a
barrier.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from solab.errors import BarrierConstructionError, InsufficientDataError, ValidationError
from solab.levelset_flow import ErrorModel, FlowTrajectory, eval_error
from solab.warped_geometry import RadialProfile, finite_differences

log = logging.getLogger(__name__)

A_MIN = 50.0
N_VERIFY = 10_000
SLACK = 1e-10
JOINT_TOL = 1e-8
# ψ <= 2a⁻²x⁻² past N a⁻¹ with N <= a_min/10 gives ψ <= 200 a⁻² on x >= 0.1
C_BOUND = 200.0

R_STAR = 0.7
TIP_VALUE = 1.52
JOINT_N = 5.0
INNER_FACTOR = 1.1
T_MATCH = 12.0
BLOW_UP = 50.0
SLOPE_STEP = 0.05
SLOPE_LIMIT = 10.0


def right_end(a: float) -> float:
    return 1.0 + a**-2 / 100.0


def barrier_operator(psi, dpsi, ddpsi, x):
    """Left side P of the spatial barrier inequality."""
    return psi * ddpsi - 0.5 * dpsi**2 + (1.0 - psi) * (x * dpsi + 2.0 * psi) / x**2 - x * dpsi


def operator_of(func: Callable, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """P for an arbitrary callable ψ, with centered differences of step h·x."""
    x = np.asarray(x, dtype=float)
    d = h * x
    f0, fp, fm = func(x), func(x + d), func(x - d)
    return barrier_operator(f0, (fp - fm) / (2 * d), (fp - 2 * f0 + fm) / d**2, x)


def outer_bound(a: float, x):
    return -0.25 * a**-4 * np.asarray(x, dtype=float) ** -5


def inner_bound(a: float, x):
    return np.full_like(np.asarray(x, dtype=float), -0.5 * a)


def verification_grid(x0: float, x1: float, n: int = N_VERIFY, n_cheb: int = 200) -> np.ndarray:
    """n uniform points plus Chebyshev clusters on the outer percent at each end."""
    width = 0.01 * (x1 - x0)
    k = np.arange(n_cheb)
    cheb = 0.5 * (1 - np.cos(np.pi * k / (n_cheb - 1)))
    grid = np.concatenate([np.linspace(x0, x1, n), x0 + width * cheb, x1 - width * cheb])
    return np.unique(np.clip(grid, x0, x1))


@dataclass(frozen=True)
class BarrierFunction:
    """C¹ samples of ψ_a and ψ_a' on [r_* a⁻¹, 1 + a⁻²/100].

    ``joints`` lists ``(x, left slope, right slope)`` where the candidate
    was glued; ``sampler`` resamples a constructed candidate on a new grid.
    """

    a: float
    r_star: float
    N: float
    theta: float
    x: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    provenance: str = "user-supplied"
    joints: tuple[tuple[float, float, float], ...] = ()
    C_bound: float = C_BOUND
    sampler: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        dpsi = np.asarray(self.psi_prime, dtype=float)
        if x.ndim != 1 or x.shape != psi.shape or x.shape != dpsi.shape or len(x) < 5:
            raise ValidationError("barrier samples need matching 1-d arrays of at least 5 points")
        if np.any(np.diff(x) <= 0):
            raise ValidationError("barrier grid not strictly increasing", int(np.flatnonzero(np.diff(x) <= 0)[0]) + 1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "psi_prime", dpsi)

    @property
    def x_min(self) -> float:
        return self.r_star / self.a

    @property
    def x_max(self) -> float:
        return right_end(self.a)

    @property
    def x_joint(self) -> float:
        return self.N / self.a

    def __call__(self, x) -> np.ndarray:
        return CubicHermiteSpline(self.x, self.psi, self.psi_prime)(x)

    def resampled(self, n: int) -> "BarrierFunction":
        if self.sampler is None:
            raise ValidationError("only constructed barriers can be resampled")
        x = verification_grid(self.x_min, self.x_max, n)
        x = np.unique(np.append(x, [self.x_joint, *(j[0] for j in self.joints)]))
        psi, dpsi = self.sampler(x)
        return BarrierFunction(self.a, self.r_star, self.N, self.theta, x, psi, dpsi,
                               self.provenance, self.joints, self.C_bound, self.sampler)

    @classmethod
    def from_callable(cls, a, r_star, N, theta, func, dfunc, n: int = N_VERIFY, **kwargs) -> "BarrierFunction":
        x = verification_grid(r_star / a, right_end(a), n)
        return cls(a, r_star, N, theta, x, func(x), dfunc(x), **kwargs)


# ----------------------------
# Verification
# ----------------------------

@dataclass(frozen=True)
class MarginReport:
    """Minimal margins per inequality; each must be >= -SLACK."""

    margins: dict[str, float]
    locations: dict[str, float]
    fitted: dict[str, float]
    ode_margin: np.ndarray = field(repr=False, default=None)
    prop_margin: np.ndarray = field(repr=False, default=None)

    @property
    def failures(self) -> list[str]:
        return [name for name, m in self.margins.items() if not m >= -SLACK]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst(self) -> tuple[str, float]:
        name = min(self.margins, key=lambda k: self.margins[k])
        return name, self.locations[name]


def _min(values: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    if len(values) == 0:
        return math.inf, math.nan
    i = int(np.argmin(values))
    return float(values[i]), float(x[i])


def verify_barrier(candidate: BarrierFunction) -> MarginReport:
    """Pointwise margins of the differential inequality and the five bounds.

    ψ'' comes from second-order differences of the ψ' samples.

    Raises:
        ValidationError: The samples do not span [r_* a⁻¹, 1 + a⁻²/100].
    """
    a, x, psi, dpsi = candidate.a, candidate.x, candidate.psi, candidate.psi_prime
    lo, hi = candidate.x_min, candidate.x_max
    if not (math.isclose(x[0], lo, rel_tol=1e-9) and math.isclose(x[-1], hi, rel_tol=1e-12)):
        raise ValidationError(f"barrier samples span [{x[0]:.10g}, {x[-1]:.10g}], expected [{lo:.10g}, {hi:.10g}]")

    ddpsi = np.gradient(dpsi, x, edge_order=2)
    P = barrier_operator(psi, dpsi, ddpsi, x)
    outer = x >= candidate.x_joint
    ode_margin = np.where(outer, outer_bound(a, x), inner_bound(a, x)) - P

    margins: dict[str, float] = {}
    locations: dict[str, float] = {}

    def record(name, values, where):
        margins[name], locations[name] = _min(values, where)

    record("ode_outer", ode_margin[outer], x[outer])
    record("ode_inner", ode_margin[~outer], x[~outer])

    sel = x >= 0.1
    record("upper_C", candidate.C_bound * a**-2 - psi[sel], x[sel])
    sel = x >= candidate.x_joint
    record("upper_decay", 2 * a**-2 * x[sel] ** -2 - psi[sel], x[sel])
    record("lower_floor", psi - a**-4 / 32, x)
    sel = x >= 1 - candidate.theta
    record("lower_neck", psi[sel] - (a**-2 * (x[sel] ** -2 - 1) + a**-4 / 16), x[sel])
    margins["tip_value"], locations["tip_value"] = float(psi[0] - 1.5), float(x[0])

    jumps = [abs(left - right) for _, left, right in candidate.joints]
    margins["c1_joint"] = JOINT_TOL - max(jumps, default=0.0)
    locations["c1_joint"] = candidate.joints[int(np.argmax(jumps))][0] if jumps else math.nan

    sel = x >= 0.1
    fitted = {
        "C": float(np.max(psi[sel]) * a**2) if sel.any() else math.nan,
        "N": candidate.N,
        "r_star": candidate.r_star,
        "theta": candidate.theta,
    }
    prop_margin = np.minimum(psi - a**-4 / 32, np.where(x >= 0.1, candidate.C_bound * a**-2 - psi, np.inf))
    report = MarginReport(margins, locations, fitted, ode_margin, prop_margin)
    if not report.passed:
        log.info("barrier a=%g fails %s", a, ", ".join(report.failures))
    return report


# ----------------------------
# Construction
# ----------------------------

def outer_expansion(a: float, x):
    """ψ = b(y - 1) + b²w(y) with b = a⁻², y = x⁻², and its first two x-derivatives."""
    x = np.asarray(x, dtype=float)
    b, y = a**-2, x**-2
    ly = np.log(y)
    w = 2 * y**2 + 2 * y**2 * ly + 4 * y * ly - 1.5
    w_y = 6 * y + 4 * y * ly + 4 * ly + 4
    w_yy = 10 + 4 * ly + 4 / y
    psi_y, psi_yy = b + b**2 * w_y, b**2 * w_yy
    return b * (y - 1) + b**2 * w, -2 * x**-3 * psi_y, 4 * x**-6 * psi_yy + 6 * x**-4 * psi_y


def _tip_shot(a: float, slope: float) -> list:
    """Shoot P[ψ] = target forward in t = a x from ψ(R_STAR) = TIP_VALUE, ψ_t = slope.

    The target is -INNER_FACTOR·a/2 up to JOINT_N and P of the outer
    expansion from there to T_MATCH. A leg that hits an event ends the shot.
    """

    def rhs_for(target):
        def rhs(t, y):
            psi, dpsi = y
            return [dpsi, ((target(t) + t * dpsi) / a**2 + 0.5 * dpsi**2 - (1 - psi) * (t * dpsi + 2 * psi) / t**2) / psi]

        return rhs

    def blown(t, y):
        return y[0] - BLOW_UP

    def crashed(t, y):
        return y[0] - a**-4 / 64

    blown.terminal = crashed.terminal = True
    targets = (lambda t: -0.5 * INNER_FACTOR * a, lambda t: float(barrier_operator(*outer_expansion(a, t / a), t / a)))
    legs, y0 = [], [TIP_VALUE, slope]
    for (t0, t1), target in zip(((R_STAR, JOINT_N), (JOINT_N, T_MATCH)), targets):
        leg = solve_ivp(rhs_for(target), (t0, t1), y0, method="DOP853", rtol=1e-12, atol=1e-15,
                        dense_output=True, events=[blown, crashed])
        legs.append(leg)
        if leg.status != 0:
            break
        y0 = leg.y[:, -1]
    return legs


def _mismatch(a: float, slope: float) -> float:
    """ψ(T_MATCH) of the shot minus the expansion there; ±1 for shots that blow up or crash."""
    end = _tip_shot(a, slope)[-1]
    if end.status != 0:
        return 1.0 if end.y[0, -1] > 1.0 else -1.0
    return float(end.y[0, -1] - outer_expansion(a, T_MATCH / a)[0])


def fit_theta(a: float, x: np.ndarray, psi: np.ndarray) -> float:
    bad = psi < a**-2 * (x**-2 - 1) + a**-4 / 16 - SLACK
    if not bad.any():
        return min(0.5, 1.0 - x[0])
    x_fail = float(x[np.flatnonzero(bad)[-1]])
    return max(0.0, min(0.5, 1.0 - x_fail) * (1 - 1e-9))


def construct_barrier(a: float, a_min: float = A_MIN, n_verify: int = N_VERIFY) -> BarrierFunction:
    """Build and verify the barrier for parameter ``a``.

    Scans the tip slope downward in steps of SLOPE_STEP until the shot
    switches from blowing up to falling below the expansion at T_MATCH,
    then solves for the slope that lands on it. Past T_MATCH a⁻¹ the
    barrier is the outer expansion itself.

    Raises:
        ValidationError: a < a_min.
        BarrierConstructionError: No slope bracket, or the candidate fails
            verification; carries the worst property.
    """
    if not a >= a_min:
        raise ValidationError(f"barrier parameter a = {a} below a_min = {a_min}")
    x_lo, x_n, x_m, x_hi = R_STAR / a, JOINT_N / a, T_MATCH / a, right_end(a)

    previous = None
    for slope in np.arange(-SLOPE_STEP, -SLOPE_LIMIT - SLOPE_STEP / 2, -SLOPE_STEP):
        value = _mismatch(a, slope)
        if previous is not None and previous[1] > 0 > value:
            break
        previous = (slope, value)
    else:
        raise BarrierConstructionError("tip_value", x_lo)
    slope = brentq(lambda s: _mismatch(a, s), slope, previous[0], xtol=1e-14, maxiter=200)
    legs = _tip_shot(a, slope)
    if len(legs) < 2 or legs[-1].status != 0:
        raise BarrierConstructionError("lower_floor", legs[-1].t[-1] / a)
    inner, middle = legs

    def sampler(x):
        x = np.asarray(x, dtype=float)
        y_in = inner.sol(np.clip(a * x, R_STAR, JOINT_N))
        y_mid = middle.sol(np.clip(a * x, JOINT_N, T_MATCH))
        psi_out, dpsi_out, _ = outer_expansion(a, np.maximum(x, x_m))
        pieces = [x <= x_n, x <= x_m]
        return np.select(pieces, [y_in[0], y_mid[0]], psi_out), np.select(pieces, [a * y_in[1], a * y_mid[1]], dpsi_out)

    x = np.unique(np.append(verification_grid(x_lo, x_hi, n_verify), [x_n, x_m]))
    psi, dpsi = sampler(x)
    joints = (
        (x_n, a * float(inner.sol(JOINT_N)[1]), a * float(middle.sol(JOINT_N)[1])),
        (x_m, a * float(middle.sol(T_MATCH)[1]), float(outer_expansion(a, x_m)[1])),
    )
    theta = fit_theta(a, x, psi)
    if theta <= 0:
        raise BarrierConstructionError("lower_neck", 1.0)
    candidate = BarrierFunction(a, R_STAR, JOINT_N, theta, x, psi, dpsi,
                                provenance="constructed", joints=joints, sampler=sampler)
    report = verify_barrier(candidate)
    if not report.passed:
        raise BarrierConstructionError(*report.worst, report)
    log.info("barrier a=%g constructed with tip slope %.6g, theta=%.4g", a, slope, theta)
    return candidate


# ----------------------------
# Parabolic form
# ----------------------------

@dataclass(frozen=True)
class CorollaryReport:
    r: np.ndarray
    s: np.ndarray
    margin: np.ndarray

    @property
    def passed(self) -> bool:
        finite = np.isfinite(self.margin)
        return bool(np.all(self.margin[finite] >= -SLACK))


def corollary_check(barrier: BarrierFunction, r_grid, s_grid) -> CorollaryReport:
    """Q = -P(x)/(2s) at x = r/√(2s) against its lower bounds.

    Points whose x falls outside the barrier domain carry NaN. P is
    interpolated within the inner and outer regions separately; ψ'' jumps
    at N a⁻¹.
    """
    r = np.asarray(r_grid, dtype=float)
    s = np.asarray(s_grid, dtype=float)
    R, S = np.meshgrid(r, s, indexing="ij")
    X = R / np.sqrt(2 * S)
    x = barrier.x
    P = barrier_operator(barrier.psi, barrier.psi_prime, np.gradient(barrier.psi_prime, x, edge_order=2), x)
    outer = X >= barrier.x_joint
    nodes = x >= barrier.x_joint
    P_at = np.where(outer, np.interp(X, x[nodes], P[nodes]), np.interp(X, x[~nodes], P[~nodes]))
    Q = -P_at / (2 * S)
    a = barrier.a
    bound = np.where(outer, 0.125 * a**-4 * X**-5 / S, 0.25 * a / S)
    inside = (X >= barrier.x_min) & (X <= barrier.x_max)
    return CorollaryReport(r, s, np.where(inside, Q - bound, np.nan))


@dataclass(frozen=True)
class Refinement:
    coarse: dict[str, float]
    fine: dict[str, float]

    @property
    def max_change(self) -> float:
        return max(abs(self.coarse[k] - self.fine[k]) for k in self.coarse if math.isfinite(self.coarse[k]))


def refinement_check(barrier: BarrierFunction, n: int = N_VERIFY) -> Refinement:
    """Verifier margins on n and 2n point grids."""
    return Refinement(verify_barrier(barrier.resampled(n)).margins, verify_barrier(barrier.resampled(2 * n)).margins)


# ----------------------------
# u-variable
# ----------------------------

@dataclass(frozen=True)
class Arc:
    """u = F_z² over a strictly monotone stretch of F, sorted by r."""

    z: np.ndarray
    r: np.ndarray
    u: np.ndarray
    increasing: bool


def _monotone_runs(F: np.ndarray) -> list[tuple[int, int, int]]:
    sign = np.sign(np.diff(F))
    runs, start = [], 0
    for i in range(1, len(sign) + 1):
        if i == len(sign) or sign[i] != sign[start]:
            if sign[start] != 0:
                runs.append((start, i, int(sign[start])))
            start = i
    return runs


def u_from_profile(profile: RadialProfile, min_points: int = 3) -> list[Arc]:
    """Split a profile into monotone arcs and sample u(r) = F_z² on each.

    A constant profile gives one flat arc with u = 0.

    Raises:
        ValidationError: No arc has ``min_points`` nodes; the message lists
            the split points.
    """
    profile.validate()
    z, F = profile.z_grid, profile.F_values
    F_z, _ = finite_differences(z, F)
    if np.all(F == F[0]):
        return [Arc(z, F.copy(), np.zeros_like(F), True)]
    arcs = []
    for lo, hi, sign in _monotone_runs(F):
        sel = slice(lo, hi + 1)
        zz, rr, uu = z[sel], F[sel], F_z[sel] ** 2
        keep = rr > 0
        zz, rr, uu = zz[keep], rr[keep], uu[keep]
        if len(rr) < min_points:
            continue
        order = np.argsort(rr)
        arcs.append(Arc(zz[order], rr[order], uu[order], sign > 0))
    if not arcs:
        splits = [hi for _, hi, _ in _monotone_runs(F)]
        raise ValidationError(f"no monotone arc with {min_points} points; splits at {splits}")
    return arcs


def u_error_terms(arc: Arc, E_rad: np.ndarray, E_orb: np.ndarray) -> np.ndarray:
    """2u²Ẽ_rad + r⁻¹u_r Ẽ_orb - 2u(Ẽ_orb/r)_r on an arc."""
    r, u = arc.r, arc.u
    u_r = CubicSpline(r, u)(r, 1)
    d_orb = CubicSpline(r, E_orb / r)(r, 1)
    return 2 * u**2 * E_rad + u_r * E_orb / r - 2 * u * d_orb


@dataclass(frozen=True)
class UResidual:
    s_values: np.ndarray
    sup: np.ndarray
    error_sup: np.ndarray


def _arc_errors(profile: RadialProfile, arc: Arc, model: ErrorModel):
    E_rad, E_orb = eval_error(model, profile)
    idx = np.searchsorted(profile.z_grid, arc.z)
    return E_rad[idx], E_orb[idx]


def _longest(arcs: list[Arc], increasing: bool) -> Arc | None:
    same = [a for a in arcs if a.increasing == increasing and len(a.r) >= 4]
    return max(same, key=lambda a: len(a.r)) if same else None


def u_residual(trajectory: FlowTrajectory, increasing: bool = False) -> UResidual:
    """Residual of the u-equation on one orientation of arcs across snapshots.

    u_s is a centered difference at fixed r; u_r and u_rr come from a cubic
    spline of u(r). The error contribution is reported separately.

    Raises:
        InsufficientDataError: Fewer than three snapshots or no arcs.
    """
    snaps = trajectory.snapshots
    if len(snaps) < 3:
        raise InsufficientDataError(f"u_residual needs at least 3 snapshots, got {len(snaps)}")
    model = trajectory.error_model
    s_out, sups, err_sups = [], [], []
    for j in range(1, len(snaps) - 1):
        arcs = [_longest(u_from_profile(snaps[k]), increasing) for k in (j - 1, j, j + 1)]
        if any(a is None for a in arcs):
            continue
        prev, here, nxt = arcs
        lo = max(prev.r[0], here.r[0], nxt.r[0])
        hi = min(prev.r[-1], here.r[-1], nxt.r[-1])
        sel = (here.r > lo) & (here.r < hi)
        sel[[0, -1]] = False
        if sel.sum() < 1:
            continue
        r = here.r[sel]
        u_prev = CubicSpline(prev.r, prev.u)(r)
        u_next = CubicSpline(nxt.r, nxt.u)(r)
        u_s = (u_next - u_prev) / (snaps[j + 1].s - snaps[j - 1].s)
        spline = CubicSpline(here.r, here.u)
        u, u_r, u_rr = spline(r), spline(r, 1), spline(r, 2)
        main = u * u_rr - 0.5 * u_r**2 + (1 - u) * (r * u_r + 2 * u) / r**2
        E_rad, E_orb = _arc_errors(snaps[j], here, model)
        extra = u_error_terms(here, E_rad, E_orb)[sel]
        res = -u_s - main - extra
        s_out.append(snaps[j].s)
        sups.append(float(np.max(np.abs(res))))
        err_sups.append(float(np.max(np.abs(extra))))
    if not s_out:
        raise InsufficientDataError("no snapshot triple shares a monotone arc")
    return UResidual(np.array(s_out), np.array(sups), np.array(err_sups))


# ----------------------------
# Comparison on trajectories
# ----------------------------

@dataclass(frozen=True)
class SupersolutionResult:
    status: str
    passed: bool | None
    margin: float | None
    location: tuple[float, float] | None
    hypothesis_excess: float


def supersolution_check(trajectory: FlowTrajectory, barrier: BarrierFunction | float) -> SupersolutionResult:
    """Check F_z² <= ψ_a(F/√(2s)) wherever F >= r_* a⁻¹ √(2s).

    The hypothesis r_max/√(2s) <= 1 + a⁻²/100 is checked first; when it
    fails no verdict is given.

    Raises:
        BarrierConstructionError: ``barrier`` is a number and no barrier
            can be built for it.
    """
    if not isinstance(barrier, BarrierFunction):
        barrier = construct_barrier(float(barrier))
    excess = float(np.max(trajectory.r_max / np.sqrt(2 * trajectory.s_values))) - barrier.x_max
    if excess > 0:
        log.warning("r_max hypothesis violated by %.3g; no supersolution verdict", excess)
        return SupersolutionResult("hypothesis violated", None, None, None, excess)

    worst, where = math.inf, None
    for profile in trajectory.snapshots:
        F = profile.F_values
        F_z, _ = finite_differences(profile.z_grid, F)
        x = F / math.sqrt(2 * profile.s)
        sel = x >= barrier.x_min
        if profile.closed:
            sel[[0, -1]] = False
        if not sel.any():
            continue
        margin = barrier(np.minimum(x[sel], barrier.x_max)) - F_z[sel] ** 2
        i = int(np.argmin(margin))
        if margin[i] < worst:
            worst, where = float(margin[i]), (profile.s, float(profile.z_grid[sel][i]))
    if where is None:
        return SupersolutionResult("vacuous", True, None, None, excess)
    ok = worst >= -SLACK
    return SupersolutionResult("pass" if ok else "fail", ok, worst, where, excess)
