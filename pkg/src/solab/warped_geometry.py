"""
Curvature of rotationally symmetric 3-metrics dz² + F(z)² g_S².

A RadialProfile is one level set: arclength samples ``z_grid`` with the
radius of the symmetry sphere ``F_values``. Derivatives come from
second-order finite differences on the (possibly non-uniform) grid, or from
caller-supplied analytic values through the ``derivatives`` keyword.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from solab.errors import ValidationError

log = logging.getLogger(__name__)

MIN_INTERIOR = 8
REGIME_TOL = 1e-6


@dataclass(frozen=True)
class RadialProfile:
    """Radius samples of one level set at flow parameter s.

    Arrays are copied to read-only float64 on construction; only the shape is
    checked here. ``validate`` applies the full set of grid conditions.
    """

    z_grid: np.ndarray
    F_values: np.ndarray
    s: float
    closed: bool = False

    def __post_init__(self) -> None:
        z = np.array(self.z_grid, dtype=float)
        F = np.array(self.F_values, dtype=float)
        if z.ndim != 1 or z.shape != F.shape:
            raise ValidationError(f"z_grid {z.shape} and F_values {F.shape} must be equal 1-d shapes")
        z.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "z_grid", z)
        object.__setattr__(self, "F_values", F)
        object.__setattr__(self, "s", float(self.s))

    def __len__(self) -> int:
        return len(self.z_grid)

    def validate(self) -> "RadialProfile":
        """Raise ValidationError naming the first offending index."""
        z, F = self.z_grid, self.F_values
        if len(z) < MIN_INTERIOR + 2:
            raise ValidationError(f"need at least {MIN_INTERIOR} interior points, got {max(len(z) - 2, 0)}")
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(F)):
            bad = np.flatnonzero(~(np.isfinite(z) & np.isfinite(F)))[0]
            raise ValidationError("non-finite sample", int(bad))
        steps = np.diff(z)
        if np.any(steps <= 0):
            raise ValidationError("z_grid not strictly increasing", int(np.flatnonzero(steps <= 0)[0]) + 1)
        if not self.s > 0:
            raise ValidationError(f"s must be positive, got {self.s}")
        interior = F[1:-1]
        if np.any(interior <= 0):
            raise ValidationError("F <= 0 at an interior point", int(np.flatnonzero(interior <= 0)[0]) + 1)
        if self.closed:
            scale = float(np.max(F))
            for idx in (0, len(F) - 1):
                if abs(F[idx]) > 1e-12 * scale:
                    raise ValidationError("closed profile must vanish at its endpoints", idx)
        elif F[0] <= 0 or F[-1] <= 0:
            raise ValidationError("open profile must be positive at its endpoints", 0 if F[0] <= 0 else len(F) - 1)
        return self

    def with_values(self, F_values: np.ndarray, s: float | None = None) -> "RadialProfile":
        """Copy with new radius samples on the same grid."""
        return RadialProfile(self.z_grid, F_values, self.s if s is None else s, self.closed)

    def reversed(self) -> "RadialProfile":
        """The same level set read with the opposite orientation of z."""
        return RadialProfile(-self.z_grid[::-1], self.F_values[::-1], self.s, self.closed)


@dataclass(frozen=True)
class RegimeReport:
    """Outcome of the slope and concavity check."""

    slope_excess: float
    slope_index: int
    max_F_zz: float
    concavity_index: int
    tol: float = REGIME_TOL
    ok: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ok", self.slope_excess <= self.tol and self.max_F_zz <= self.tol)


def _endpoint_slope(F0, F1, F2, d1, d2):
    # one-sided second order, written as differences so constants give exactly 0
    a = -(2 * d1 + d2) / (d1 * (d1 + d2))
    c = -d1 / (d2 * (d1 + d2))
    return a * (F0 - F1) + c * (F2 - F1)


def finite_differences(z: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """F_z and F_zz on a strictly increasing grid of at least 3 nodes."""
    hm = z[1:-1] - z[:-2]
    hp = z[2:] - z[1:-1]
    dFp = F[2:] - F[1:-1]
    dFm = F[:-2] - F[1:-1]
    denom = hm * hp * (hm + hp)

    F_z = np.empty_like(F)
    F_zz = np.empty_like(F)
    F_z[1:-1] = (hm**2 * dFp - hp**2 * dFm) / denom
    F_zz[1:-1] = 2 * (hm * dFp + hp * dFm) / denom

    F_z[0] = _endpoint_slope(F[0], F[1], F[2], z[1] - z[0], z[2] - z[1])
    F_z[-1] = -_endpoint_slope(F[-1], F[-2], F[-3], z[-1] - z[-2], z[-2] - z[-3])
    if len(F) > 3:
        F_zz[0] = F_zz[1] + (F_zz[1] - F_zz[2]) * (z[1] - z[0]) / (z[2] - z[1])
        F_zz[-1] = F_zz[-2] + (F_zz[-2] - F_zz[-3]) * (z[-1] - z[-2]) / (z[-2] - z[-3])
    else:
        F_zz[0] = F_zz[-1] = F_zz[1]
    return F_z, F_zz


def derivatives(profile: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference F_z and F_zz of a validated profile."""
    profile.validate()
    return finite_differences(profile.z_grid, profile.F_values)


def _resolve(profile, derivs):
    if derivs is None:
        return derivatives(profile)
    profile.validate()
    F_z, F_zz = (np.asarray(d, dtype=float) for d in derivs)
    if F_z.shape != profile.F_values.shape or F_zz.shape != profile.F_values.shape:
        raise ValidationError("analytic derivatives must match the grid shape")
    return F_z, F_zz


def sectional_curvatures(
    profile: RadialProfile,
    derivatives: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Radial and orbital sectional curvatures.

    K_rad = -F_zz / F and K_orb = (1 - F_z²) / F². Tips (F = 0) carry NaN.

    Args:
        profile: The level set.
        derivatives: Optional analytic ``(F_z, F_zz)`` on the same grid.

    Returns:
        ``(K_rad, K_orb)`` arrays on the full grid.

    Raises:
        ValidationError: Degenerate grid or F <= 0 at an interior point.
    """
    F_z, F_zz = _resolve(profile, derivatives)
    F = profile.F_values
    with np.errstate(divide="ignore", invalid="ignore"):
        K_rad = np.where(F > 0, -F_zz / F, np.nan)
        K_orb = np.where(F > 0, (1.0 - F_z**2) / F**2, np.nan)
    return K_rad, K_orb


def ricci(profile: RadialProfile, derivatives=None) -> tuple[np.ndarray, np.ndarray]:
    """Ric = Ric_rad dz² + Ric_orb_coeff g_S²."""
    K_rad, K_orb = sectional_curvatures(profile, derivatives)
    return 2.0 * K_rad, profile.F_values**2 * (K_rad + K_orb)


def scalar_curvature(profile: RadialProfile, derivatives=None) -> np.ndarray:
    K_rad, K_orb = sectional_curvatures(profile, derivatives)
    return 4.0 * K_rad + 2.0 * K_orb


def max_radius(profile: RadialProfile) -> float:
    return float(np.max(profile.F_values))


def orbital_energy_ratio(profile: RadialProfile, derivatives=None) -> np.ndarray:
    """F² K_orb, i.e. 1 - F_z²."""
    F_z, _ = _resolve(profile, derivatives)
    return 1.0 - F_z**2


def regime_check(profile: RadialProfile, tol: float = REGIME_TOL) -> RegimeReport:
    """Check |F_z| <= 1 + tol and F_zz <= tol away from tips."""
    F_z, F_zz = derivatives(profile)
    tips = profile.F_values <= 0
    slope = np.where(tips, -np.inf, np.abs(F_z) - 1.0)
    F_zz = np.where(tips, -np.inf, F_zz)
    i_slope = int(np.argmax(slope))
    i_conc = int(np.argmax(F_zz))
    report = RegimeReport(float(slope[i_slope]), i_slope, float(F_zz[i_conc]), i_conc, tol)
    if not report.ok:
        log.debug("profile at s=%g outside slope/concavity regime: %s", profile.s, report)
    return report
