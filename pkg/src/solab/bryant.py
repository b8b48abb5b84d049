"""
The 3d Bryant soliton as an ODE target for tip matching.

The rotationally symmetric steady soliton dr² + φ(r)² g_S² with Ric = ∇²f
reduces to

    f''       = -2 φ''/φ
    f' φ'/φ   = -φ''/φ + (1 - φ'²)/φ²

with φ(0) = 0, φ'(0) = 1, f'(0) = 0 and the scale fixed by R(0) = 1. The
tip is a regular singular point, so integration starts at r₀ from the power
series

    φ  = r - r³/36 + 87 r⁵/64800
    f' = r/3 - 2 r³/135

which matches the system to O(r⁷). R + f'² = 1 is a first integral and serves
as the integrator check.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from solab.errors import InsufficientDataError, ValidationError

log = logging.getLogger(__name__)

R0 = 1e-3
C3 = -1.0 / 36.0
C5 = 87.0 / 64800.0
G1 = 1.0 / 3.0
G3 = -2.0 / 135.0


def series_coefficient() -> float:
    """c₃ in φ = r + c₃ r³ + O(r⁵), from R(0) = -36 c₃ = 1."""
    return C3


def series_start(r: float) -> np.ndarray:
    """(φ, φ', f') from the tip expansion."""
    return np.array([
        r + C3 * r**3 + C5 * r**5,
        1.0 + 3 * C3 * r**2 + 5 * C5 * r**4,
        G1 * r + G3 * r**3,
    ])


def bryant_rhs(r: float, y: np.ndarray) -> np.ndarray:
    phi, dphi, fp = y
    ddphi = (1.0 - dphi**2) / phi - fp * dphi
    return np.array([dphi, ddphi, -2.0 * ddphi / phi])


def scalar_curvature(y: np.ndarray) -> np.ndarray:
    """R = 4 K_rad + 2 K_orb of the warped metric, from the ODE state."""
    phi, dphi, fp = y
    ddphi = (1.0 - dphi**2) / phi - fp * dphi
    return -4.0 * ddphi / phi + 2.0 * (1.0 - dphi**2) / phi**2


@dataclass(frozen=True)
class BryantProfile:
    """Samples of the Bryant soliton from the tip (r = 0) outward.

    Normalization: R(0) = 1 and R + f'² = 1.
    """

    r_grid: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    fprime: np.ndarray
    R: np.ndarray

    @property
    def identity_drift(self) -> np.ndarray:
        return np.abs(self.R + self.fprime**2 - 1.0)

    @cached_property
    def _phi_spline(self) -> CubicSpline:
        return CubicSpline(self.r_grid, self.phi)

    @cached_property
    def _slope_spline(self) -> CubicSpline:
        return CubicSpline(self.r_grid, self.phi_prime)

    def phi_at(self, r) -> np.ndarray:
        return self._phi_spline(r)

    def phi_prime_at(self, r) -> np.ndarray:
        return self._slope_spline(r)

    def __hash__(self) -> int:
        return id(self)


def solve_bryant(r_max: float = 1000.0, tol: float = 1e-8, n_points: int = 4000) -> BryantProfile:
    """Integrate the soliton ODE from the series start to r_max.

    Args:
        r_max: Outer radius.
        tol: Allowed drift of R + f'² from 1.
        n_points: Number of logarithmically spaced samples beyond r₀.

    Raises:
        ValidationError: r_max <= r₀, or the identity drifts beyond tol; the
            error index names the first drifting sample.
    """
    if not r_max > R0:
        raise ValidationError(f"r_max must exceed the series start {R0}, got {r_max}")
    r_eval = np.geomspace(R0, r_max, n_points)
    sol = solve_ivp(
        bryant_rhs,
        (R0, r_max),
        series_start(R0),
        method="DOP853",
        t_eval=r_eval,
        rtol=1e-13,
        atol=1e-15,
    )
    if not sol.success:
        raise ValidationError(f"Bryant integration failed: {sol.message}")

    y = sol.y
    r = np.concatenate([[0.0], sol.t])
    phi = np.concatenate([[0.0], y[0]])
    dphi = np.concatenate([[1.0], y[1]])
    fp = np.concatenate([[0.0], y[2]])
    R = np.concatenate([[1.0], scalar_curvature(y)])
    profile = BryantProfile(r, phi, dphi, fp, R)

    drift = profile.identity_drift
    if np.any(drift > tol):
        idx = int(np.flatnonzero(drift > tol)[0])
        raise ValidationError(f"R + f'^2 drifted by {drift[idx]:.3g} at r = {r[idx]:.6g}", idx)
    log.debug("Bryant profile to r=%g, max identity drift %.3g", r_max, float(drift.max()))
    return profile


def bryant_rk4(r_end: float, n_steps: int) -> np.ndarray:
    """Fixed-step classical RK4 from the series start; returns the state at r_end."""
    h = (r_end - R0) / n_steps
    r, y = R0, series_start(R0)
    for _ in range(n_steps):
        k1 = bryant_rhs(r, y)
        k2 = bryant_rhs(r + h / 2, y + h / 2 * k1)
        k3 = bryant_rhs(r + h / 2, y + h / 2 * k2)
        k4 = bryant_rhs(r + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r += h
    return y


def bryant_cap(bryant: BryantProfile, slope: float, radius: float):
    """Scaled Bryant cap meeting a junction with given |F_z| and F.

    Returns:
        ``(cap, length)``: ``cap(d)`` is the radius at distance ``d`` beyond
        the junction, and the tip sits at ``d = length``.
    """
    if not 0 < slope < 1:
        raise ValidationError(f"junction slope must lie in (0, 1), got {slope}")
    if bryant.phi_prime[-1] >= slope:
        raise ValidationError(f"Bryant profile too short: phi' at r_max is {bryant.phi_prime[-1]:.4g} >= {slope:.4g}")
    hi = bryant.r_grid[int(np.flatnonzero(bryant.phi_prime < slope)[0])]
    r_j = brentq(lambda r: float(bryant.phi_prime_at(r)) - slope, 0.0, hi)
    scale = radius / float(bryant.phi_at(r_j))
    length = scale * r_j

    def cap(d):
        r = np.clip(r_j - np.asarray(d, dtype=float) / scale, 0.0, r_j)
        return scale * bryant.phi_at(r)

    return cap, length


@dataclass(frozen=True)
class TipComparison:
    status: str
    discrepancy: float | None
    R_tip: float | None
    n_points: int


def compare_tip(snapshot, bryant: BryantProfile, side: str = "right") -> TipComparison:
    """Rescale a tip region by its curvature and compare radii with Bryant.

    ``snapshot`` is a closed RadialProfile or a BryantProfile. The radius
    profile is measured as a function of distance to the tip, multiplied by
    √R_tip, and compared pointwise with φ over the overlap.
    """
    from solab.asymptotics import tip_curvature_estimate

    if isinstance(snapshot, BryantProfile):
        d, F, R_tip = snapshot.r_grid, snapshot.phi, float(snapshot.R[0])
    else:
        if not snapshot.closed:
            return TipComparison("insufficient resolution", None, None, 0)
        z, F = snapshot.z_grid, snapshot.F_values
        d = z[-1] - z if side == "right" else z - z[0]
        try:
            R_tip = tip_curvature_estimate(snapshot, side)
        except InsufficientDataError:
            return TipComparison("insufficient resolution", None, None, 0)
        if not R_tip > 0:
            return TipComparison("insufficient resolution", None, None, 0)

    scale = np.sqrt(R_tip)
    region = (F > 0) & (F * scale <= 10.0) & (d * scale <= bryant.r_grid[-1])
    n = int(region.sum())
    if n < 20:
        return TipComparison("insufficient resolution", None, R_tip, n)
    d_hat = d[region] * scale
    F_hat = F[region] * scale
    ref = bryant.phi_at(d_hat)
    disc = float(np.max(np.abs(F_hat - ref) / ref))
    return TipComparison("ok", disc, R_tip, n)
