"""
Parabolic rescaling of level-set profiles.

    z = √s ξ,   s = e^{-τ},   F = √s (√2 + G)

G measures the deviation from the round cylinder of radius √2. This module
is an analysis view of the (z, s) solver: it converts snapshots, evaluates
the G-equation for a posteriori checks and tracks ρ_max, ρ and δ over the
simulated window. Window sups are lower bounds for sups over all τ.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from solab.errors import InsufficientDataError, ValidationError
from solab.levelset_flow import ErrorModel, FlowTrajectory, eval_error, integral_from_origin, origin_index
from solab.warped_geometry import RadialProfile, finite_differences

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RescaledProfile:
    """G samples on the rescaled grid at time τ = -log s."""

    xi_grid: np.ndarray
    G_values: np.ndarray
    tau: float
    closed: bool = False

    def __post_init__(self) -> None:
        xi = np.array(self.xi_grid, dtype=float)
        G = np.array(self.G_values, dtype=float)
        if xi.ndim != 1 or xi.shape != G.shape:
            raise ValidationError(f"xi_grid {xi.shape} and G_values {G.shape} must be equal 1-d shapes")
        xi.setflags(write=False)
        G.setflags(write=False)
        object.__setattr__(self, "xi_grid", xi)
        object.__setattr__(self, "G_values", G)
        object.__setattr__(self, "tau", float(self.tau))

    def __len__(self) -> int:
        return len(self.xi_grid)

    @property
    def s(self) -> float:
        return math.exp(-self.tau)

    def validate(self) -> "RescaledProfile":
        if np.any(np.diff(self.xi_grid) <= 0):
            raise ValidationError("xi_grid not strictly increasing", int(np.flatnonzero(np.diff(self.xi_grid) <= 0)[0]) + 1)
        W = SQRT2 + self.G_values[1:-1]
        if np.any(W <= 0):
            raise ValidationError("sqrt(2) + G <= 0 at an interior point", int(np.flatnonzero(W <= 0)[0]) + 1)
        return self


def to_rescaled(profile: RadialProfile) -> RescaledProfile:
    profile.validate()
    root = math.sqrt(profile.s)
    return RescaledProfile(profile.z_grid / root, profile.F_values / root - SQRT2, -math.log(profile.s), profile.closed)


def from_rescaled(rescaled: RescaledProfile) -> RadialProfile:
    root = math.exp(-rescaled.tau / 2)
    return RadialProfile(root * rescaled.xi_grid, root * (SQRT2 + rescaled.G_values), rescaled.s, rescaled.closed)


def rescaled_errors(profile: RescaledProfile, model: ErrorModel) -> tuple[np.ndarray, np.ndarray]:
    """(𝓔^rad, 𝓔^orb) = (e^{-τ} Ē_rad, Ē_orb) on the rescaled grid."""
    E_rad, E_orb = eval_error(model, from_rescaled(profile))
    return math.exp(-profile.tau) * E_rad, E_orb


def g_rhs(profile: RescaledProfile, model: ErrorModel) -> np.ndarray:
    """G_τ from the rescaled evolution equation.

        G_τ = G_ξξ - (ξ/2) G_ξ + (√2 + G)/2 - (1 + G_ξ²)/(√2 + G)
              + 2 G_ξ (G_ξ(0)/(√2 + G(0)) - ∫₀^ξ G_ξ²/(√2 + G)²)
              - 𝓔^orb/(√2 + G) + G_ξ ∫₀^ξ 𝓔^rad

    Tips of a closed profile carry NaN.

    Raises:
        ConfigError: ξ = 0 is not a grid node.
        ValidationError: √2 + G <= 0 at an interior point.
    """
    profile.validate()
    i0 = origin_index(profile.xi_grid)
    E_rad, E_orb = rescaled_errors(profile, model)
    sl = slice(1, -1) if profile.closed else slice(None)
    j0 = i0 - (1 if profile.closed else 0)
    xi = profile.xi_grid[sl]
    G = profile.G_values[sl]
    W = SQRT2 + G
    G_xi, G_xixi = finite_differences(xi, G)
    J = integral_from_origin(G_xi**2 / W**2, xi, j0)
    I_E = integral_from_origin(E_rad[sl], xi, j0)

    out = np.full(len(profile), np.nan)
    out[sl] = (
        G_xixi
        - 0.5 * xi * G_xi
        + 0.5 * W
        - (1.0 + G_xi**2) / W
        + 2.0 * G_xi * (G_xi[j0] / W[j0] - J)
        - E_orb[sl] / W
        + G_xi * I_E
    )
    return out


def error_term(profile: RescaledProfile, model: ErrorModel) -> np.ndarray:
    """The error contribution -𝓔^orb/(√2 + G) + G_ξ ∫₀^ξ 𝓔^rad of G_τ."""
    i0 = origin_index(profile.xi_grid)
    E_rad, E_orb = rescaled_errors(profile, model)
    sl = slice(1, -1) if profile.closed else slice(None)
    j0 = i0 - (1 if profile.closed else 0)
    xi, G = profile.xi_grid[sl], profile.G_values[sl]
    G_xi, _ = finite_differences(xi, G)
    out = np.zeros(len(profile))
    out[sl] = -E_orb[sl] / (SQRT2 + G) + G_xi * integral_from_origin(E_rad[sl], xi, j0)
    return out


# ----------------------------
# Trackers
# ----------------------------

@dataclass(frozen=True)
class Trackers:
    """ρ_max, windowed ρ and δ per snapshot, τ increasing.

    ``rho`` and ``delta`` are sups over the simulated window only.
    """

    tau: np.ndarray
    rho_max: np.ndarray
    rho: np.ndarray
    delta: np.ndarray
    G0: np.ndarray

    @property
    def window_start(self) -> float:
        return float(self.tau[0])


def trackers_from_series(tau, sup_G, G0) -> Trackers:
    tau = np.asarray(tau, dtype=float)
    rho_max = np.exp(tau / 4) + np.asarray(sup_G, dtype=float)
    rho = np.maximum.accumulate(rho_max)
    G0 = np.asarray(G0, dtype=float)
    delta = rho + np.maximum.accumulate(np.abs(G0))
    return Trackers(tau, rho_max, rho, delta, G0)


def trackers(trajectory: FlowTrajectory) -> Trackers:
    """Trackers along a trajectory; snapshots come in order of increasing τ."""
    if len(trajectory) == 0:
        raise InsufficientDataError("trackers need at least one snapshot")
    tau, sup_G, G0 = [], [], []
    for profile in trajectory.snapshots:
        r = to_rescaled(profile)
        interior = slice(1, -1) if r.closed else slice(None)
        tau.append(r.tau)
        sup_G.append(float(np.max(r.G_values[interior])))
        G0.append(float(r.G_values[origin_index(r.xi_grid)]))
    return trackers_from_series(tau, sup_G, G0)


# ----------------------------
# Unit-step recursions
# ----------------------------

def unit_grid(tau: np.ndarray, *series: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Resample series onto τ_max, τ_max - 1, ... with monotone cubic interpolation.

    Returns the unit grid in increasing order and the resampled series.

    Raises:
        InsufficientDataError: Fewer than two unit-spaced samples fit in the window.
    """
    tau = np.asarray(tau, dtype=float)
    order = np.argsort(tau)
    tau = tau[order]
    if len(tau) < 2 or tau[-1] - tau[0] < 1.0:
        raise InsufficientDataError("recursion checks need a window of at least one unit in tau")
    steps = int(math.floor(tau[-1] - tau[0] + 1e-9))
    grid = tau[-1] - np.arange(steps, -1, -1, dtype=float)
    grid[0] = max(grid[0], tau[0])
    out = [PchipInterpolator(tau, np.asarray(v, dtype=float)[order])(grid) for v in series]
    return grid, out


@dataclass(frozen=True)
class RecursionLedger:
    """Minimal constants per unit step, keyed by inequality name."""

    tau: np.ndarray
    constants: dict[str, np.ndarray]
    cap: float

    @property
    def passed(self) -> dict[str, bool]:
        return {name: bool(np.all(C <= self.cap)) for name, C in self.constants.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())


def minimal_constant(excess: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """max(excess, 0) / scale, infinite where a positive excess meets a zero scale."""
    excess = np.maximum(np.asarray(excess, dtype=float), 0.0)
    scale = np.asarray(scale, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        C = np.where(scale > 0, excess / np.where(scale > 0, scale, 1.0), np.where(excess > 0, np.inf, 0.0))
    return C


def rho_max_recursion(report, cap: float = 1.0) -> RecursionLedger:
    """Minimal C with ρ_max(τ-1) <= e^{-1/2} ρ_max(τ) + C sup_{[τ-1,τ]} γ^{1/4}.

    ``report`` is a spectral report carrying ``tau``, ``rho_max`` and ``gamma``.
    """
    grid, (rho_max, gamma) = unit_grid(report.tau, report.rho_max, report.gamma)
    g4 = np.maximum(gamma, 0.0) ** 0.25
    sup_g4 = np.maximum(g4[:-1], g4[1:])
    C = minimal_constant(rho_max[:-1] - math.exp(-0.5) * rho_max[1:], sup_g4)
    return RecursionLedger(grid[1:], {"rho_max": C}, cap)


@dataclass(frozen=True)
class GConvergence:
    tau: np.ndarray
    values: np.ndarray
    slope: float | None


def g_convergence(trajectory: FlowTrajectory, L: float = 4.0) -> GConvergence:
    """|τ| sup_{|ξ|<=L} |G + (ξ² - 2)/(4√2 |τ|)| per snapshot, with its trend in τ."""
    tau, vals = [], []
    for profile in trajectory.snapshots:
        r = to_rescaled(profile)
        sel = np.abs(r.xi_grid) <= L
        if r.closed:
            sel[[0, -1]] = False
        if not sel.any():
            continue
        t = abs(r.tau)
        dev = r.G_values[sel] + (r.xi_grid[sel] ** 2 - 2) / (4 * SQRT2 * t)
        tau.append(r.tau)
        vals.append(float(np.max(np.abs(dev)) * t))
    if not tau:
        raise InsufficientDataError(f"no snapshot reaches |xi| <= {L}")
    slope = float(np.polyfit(tau, vals, 1)[0]) if len(tau) > 1 else None
    return GConvergence(np.array(tau), np.array(vals), slope)
