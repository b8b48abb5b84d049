"""
Hermite analysis of the rescaled deviation G.

The operator 𝓛u = u_ξξ - (ξ/2)u_ξ + u is self-adjoint on L²(dν) with
dν = (4π)^{-1/2} e^{-ξ²/4} dξ. Its unit eigenfunctions are

    h_k(ξ) = He_k(ξ/√2) / √(k!),    𝓛 h_k = (1 - k/2) h_k,

so h₀, h₁ are unstable (positive) modes, h₂ is neutral and the rest are
stable. Integrals against ν use Gauss-Hermite quadrature with ξ = 2x.

Mode energies:

    γ⁺ = a₀² + a₁²,   γ⁰ = a₂²,   γ⁻ = ‖Ĝ‖² - γ⁺ - γ⁰,

with a_k = ⟨Ĝ, h_k⟩ and Ĝ the cut-off G. The Γ quantities are running sups
over the window, Γ and Γ⁺ augmented by ρ_max^{8-1/200}.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import hermite_e
from scipy.interpolate import CubicSpline

from solab.errors import InsufficientDataError, ValidationError
from solab.levelset_flow import FlowTrajectory
from solab.rescaled_flow import (
    RecursionLedger,
    RescaledProfile,
    error_term,
    minimal_constant,
    to_rescaled,
    trackers,
    unit_grid,
)

log = logging.getLogger(__name__)

AUGMENT_POWER = 8.0 - 1.0 / 200.0
DELTA_POWER = 1.0 / 200.0
DEFAULT_EXPONENT = 0.01
GAMMA_MINUS_TOL = 1e-10


# ----------------------------
# Basis and quadrature
# ----------------------------

@dataclass(frozen=True)
class HermiteBasis:
    """First ``n_modes`` unit eigenfunctions of 𝓛 and a ν-quadrature rule."""

    n_modes: int = 8
    n_nodes: int = 64

    def __post_init__(self) -> None:
        if self.n_modes < 3:
            raise ValidationError(f"need at least the modes h0..h2, got n_modes = {self.n_modes}")
        if self.n_nodes < self.n_modes + 1:
            raise ValidationError(f"n_nodes ({self.n_nodes}) must exceed n_modes ({self.n_modes})")

    @cached_property
    def _rule(self) -> tuple[np.ndarray, np.ndarray]:
        x, w = np.polynomial.hermite.hermgauss(self.n_nodes)
        return 2.0 * x, w / math.sqrt(math.pi)

    @property
    def nodes(self) -> np.ndarray:
        return self._rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule[1]

    @cached_property
    def polynomials(self) -> tuple[Polynomial, ...]:
        out = []
        for k in range(self.n_modes):
            power = hermite_e.herme2poly(np.eye(k + 1)[k])
            power = power * (1.0 / math.sqrt(2.0)) ** np.arange(k + 1)
            out.append(Polynomial(power / math.sqrt(math.factorial(k))))
        return tuple(out)

    @property
    def coefficients(self) -> list[list[float]]:
        return [list(p.coef) for p in self.polynomials]

    @property
    def eigenvalues(self) -> np.ndarray:
        return 1.0 - np.arange(self.n_modes) / 2.0

    @cached_property
    def values(self) -> np.ndarray:
        """h_k at the nodes, shape (n_modes, n_nodes)."""
        return np.array([p(self.nodes) for p in self.polynomials])

    def __hash__(self) -> int:
        return hash((self.n_modes, self.n_nodes))


def apply_operator(p: Polynomial) -> Polynomial:
    """𝓛p = p'' - (ξ/2)p' + p."""
    return p.deriv(2) - Polynomial([0.0, 0.5]) * p.deriv() + p


# ----------------------------
# Samples, inner products
# ----------------------------

@dataclass(frozen=True)
class Samples:
    """Function samples on an increasing ξ grid, extended by zero outside it."""

    xi: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        xi = np.asarray(self.xi, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if xi.shape != v.shape or xi.ndim != 1 or len(xi) < 4:
            raise ValidationError("samples need matching 1-d arrays of at least 4 points")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "values", v)

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.xi, self.values)

    def covers(self, points: np.ndarray) -> bool:
        return bool(self.xi[0] <= points.min() and points.max() <= self.xi[-1])

    def __call__(self, points: np.ndarray, nu: int = 0) -> np.ndarray:
        inside = (points >= self.xi[0]) & (points <= self.xi[-1])
        out = np.zeros_like(points, dtype=float)
        out[inside] = self.spline(points[inside], nu)
        return out

    def __hash__(self) -> int:
        return id(self)


Function = Samples | Polynomial | Callable[[np.ndarray], np.ndarray]


def _at_nodes(u: Function, basis: HermiteBasis, nu: int = 0) -> np.ndarray:
    x = basis.nodes
    if isinstance(u, Samples):
        if not u.covers(x):
            log.debug("samples on [%g, %g] extended by zero to the quadrature support", u.xi[0], u.xi[-1])
        return u(x, nu)
    if isinstance(u, Polynomial):
        return u.deriv(nu)(x) if nu else u(x)
    if nu:
        raise ValidationError("derivatives need samples or a polynomial")
    return np.asarray(u(x), dtype=float)


def inner(u: Function, v: Function, basis: HermiteBasis | None = None) -> float:
    """⟨u, v⟩_H = ∫ u v dν by quadrature."""
    basis = basis or HermiteBasis()
    return float(np.sum(basis.weights * _at_nodes(u, basis) * _at_nodes(v, basis)))


def dnorm(u: Function, basis: HermiteBasis | None = None) -> float:
    """‖u‖_𝒟 = (∫ u² + u_ξ² dν)^{1/2}; samples are differentiated through their spline."""
    basis = basis or HermiteBasis()
    u0 = _at_nodes(u, basis)
    u1 = _at_nodes(u, basis, nu=1)
    return float(math.sqrt(np.sum(basis.weights * (u0**2 + u1**2))))


def moments(basis: HermiteBasis, orders) -> np.ndarray:
    """E_ν[ξ^k] by quadrature."""
    return np.array([float(np.sum(basis.weights * basis.nodes**k)) for k in orders])


def eigen_defect(basis: HermiteBasis, k: int) -> float:
    """‖𝓛h_k - (1 - k/2) h_k‖_H."""
    h = basis.polynomials[k]
    diff = apply_operator(h) - basis.eigenvalues[k] * h
    return math.sqrt(max(inner(diff, diff, basis), 0.0))


def self_adjoint_defect(basis: HermiteBasis, u: Polynomial, v: Polynomial) -> float:
    return abs(inner(apply_operator(u), v, basis) - inner(u, apply_operator(v), basis))


# ----------------------------
# Cutoff
# ----------------------------

def _psi(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def eta(t) -> np.ndarray:
    """Smooth even bump: 1 on |t| <= 1/2, 0 on |t| >= 1.

    On 1/2 < |t| < 1, with x = 2|t| - 1, η = ψ(1 - x) / (ψ(1 - x) + ψ(x))
    and ψ(x) = e^{-1/x} for x > 0, 0 otherwise. η is nonincreasing in |t|.
    """
    x = np.clip(2.0 * np.abs(np.asarray(t, dtype=float)) - 1.0, 0.0, 1.0)
    a, b = _psi(1.0 - x), _psi(x)
    return a / (a + b)


def cutoff(G: RescaledProfile, delta: float, exponent: float = DEFAULT_EXPONENT) -> Samples:
    """Ĝ = η(δ^exponent ξ) G on the profile's own grid."""
    if not delta > 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    phi = eta(delta**exponent * G.xi_grid)
    return Samples(G.xi_grid, phi * G.G_values)


# ----------------------------
# Projection
# ----------------------------

@dataclass(frozen=True)
class Projection:
    a: np.ndarray
    gamma_plus: float
    gamma_0: float
    gamma_minus: float
    norm2: float
    parseval_defect: float


def project(u: Function, basis: HermiteBasis | None = None) -> Projection:
    """Coefficients a_k and the mode energies of u."""
    basis = basis or HermiteBasis()
    vals = _at_nodes(u, basis)
    a = basis.values @ (basis.weights * vals)
    norm2 = float(np.sum(basis.weights * vals**2))
    g_plus = float(a[0] ** 2 + a[1] ** 2)
    g_0 = float(a[2] ** 2)
    g_minus = norm2 - g_plus - g_0
    if g_minus < -GAMMA_MINUS_TOL:
        log.warning("gamma_minus = %.3g below zero beyond tolerance, clamped", g_minus)
    return Projection(a, g_plus, g_0, max(g_minus, 0.0), norm2, norm2 - float(np.sum(a**2)))


# ----------------------------
# Reports
# ----------------------------

class Dichotomy(str, Enum):
    NEUTRAL = "NeutralDominates"
    POSITIVE = "PositiveDominates"
    INCONCLUSIVE = "Inconclusive"


def _running_sup(x: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SpectralReport:
    """Mode series in order of increasing τ.

    ``Gamma`` and ``Gamma_plus`` include the ρ_max^{8-1/200} term; the
    ``*_raw`` variants do not.
    """

    tau: np.ndarray
    a: np.ndarray
    gamma_plus: np.ndarray
    gamma_0: np.ndarray
    gamma_minus: np.ndarray
    rho_max: np.ndarray
    rho: np.ndarray
    delta: np.ndarray
    exponent: float = DEFAULT_EXPONENT
    error_norm: np.ndarray | None = None
    G0: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_plus + self.gamma_0 + self.gamma_minus

    @property
    def augment(self) -> np.ndarray:
        return np.maximum(self.rho_max, 0.0) ** AUGMENT_POWER

    @property
    def Gamma(self) -> np.ndarray:
        return _running_sup(self.gamma + self.augment)

    @property
    def Gamma_plus(self) -> np.ndarray:
        return _running_sup(self.gamma_plus + self.augment)

    @property
    def Gamma_raw(self) -> np.ndarray:
        return _running_sup(self.gamma)

    @property
    def Gamma_plus_raw(self) -> np.ndarray:
        return _running_sup(self.gamma_plus)

    @property
    def Gamma_0(self) -> np.ndarray:
        return _running_sup(self.gamma_0)

    @property
    def Gamma_minus(self) -> np.ndarray:
        return _running_sup(self.gamma_minus)

    @property
    def alpha(self) -> np.ndarray:
        return self.a[:, 2]

    @property
    def A(self) -> np.ndarray:
        return _running_sup(np.abs(self.alpha))

    @classmethod
    def from_gammas(cls, tau, gamma_plus, gamma_0, gamma_minus, rho_max=None, delta=None, alpha=None):
        """Report from synthetic series; missing trackers default to zero, δ to ρ."""
        tau = np.asarray(tau, dtype=float)
        order = np.argsort(tau)
        n = len(tau)

        def col(x, default=0.0):
            return np.full(n, default) if x is None else np.asarray(x, dtype=float)[order]

        rho_max = col(rho_max)
        rho = _running_sup(rho_max)
        a = np.zeros((n, 3))
        a[:, 2] = col(alpha)
        return cls(
            tau=tau[order],
            a=a,
            gamma_plus=col(gamma_plus),
            gamma_0=col(gamma_0),
            gamma_minus=col(gamma_minus),
            rho_max=rho_max,
            rho=rho,
            delta=rho if delta is None else np.broadcast_to(np.asarray(delta, dtype=float), (n,))[order],
        )


def analyze(
    trajectory: FlowTrajectory,
    basis: HermiteBasis | None = None,
    exponent: float = DEFAULT_EXPONENT,
) -> SpectralReport:
    """Project every snapshot's cut-off G onto the Hermite basis."""
    basis = basis or HermiteBasis()
    if len(trajectory) == 0:
        raise InsufficientDataError("spectral analysis needs at least one snapshot")
    tr = trackers(trajectory)
    model = trajectory.error_model
    rows, err = [], []
    for profile, delta in zip(trajectory.snapshots, tr.delta):
        G = to_rescaled(profile)
        proj = project(cutoff(G, delta, exponent), basis)
        rows.append(proj)
        phi = eta(delta**exponent * G.xi_grid)
        E = Samples(G.xi_grid, phi * error_term(G, model))
        err.append(math.sqrt(max(inner(E, E, basis), 0.0)))
    log.info("spectral analysis of %d snapshots, cutoff exponent %g", len(rows), exponent)
    return SpectralReport(
        tau=tr.tau,
        a=np.array([p.a for p in rows]),
        gamma_plus=np.array([p.gamma_plus for p in rows]),
        gamma_0=np.array([p.gamma_0 for p in rows]),
        gamma_minus=np.array([p.gamma_minus for p in rows]),
        rho_max=tr.rho_max,
        rho=tr.rho,
        delta=tr.delta,
        exponent=exponent,
        error_norm=np.array(err),
        G0=tr.G0,
    )


# ----------------------------
# Recursions and classification
# ----------------------------

def mode_recursion_check(report: SpectralReport, cap: float = 1.0) -> RecursionLedger:
    """Minimal constants in the unit-step Γ inequalities.

        Γ⁺(τ-1) <= e^{-1} Γ⁺(τ) + C δ^{1/200}(τ) Γ(τ)
        |Γ⁰(τ-1) - Γ⁰(τ)| <= C δ^{1/200}(τ) Γ(τ)
        Γ⁻(τ-1) >= e Γ⁻(τ) - C δ^{1/200}(τ) Γ(τ)
    """
    grid, (Gp, G0, Gm, G, delta) = unit_grid(
        report.tau, report.Gamma_plus, report.Gamma_0, report.Gamma_minus, report.Gamma, report.delta
    )
    scale = np.maximum(delta[1:], 0.0) ** DELTA_POWER * G[1:]
    constants = {
        "Gamma_plus": minimal_constant(Gp[:-1] - math.exp(-1) * Gp[1:], scale),
        "Gamma_0": minimal_constant(np.abs(G0[:-1] - G0[1:]), scale),
        "Gamma_minus": minimal_constant(math.e * Gm[1:] - Gm[:-1], scale),
    }
    ledger = RecursionLedger(grid[1:], constants, cap)
    for name, ok in ledger.passed.items():
        if not ok:
            log.warning("mode recursion for %s exceeds cap %g", name, cap)
    return ledger


def gamma_recursion_check(report: SpectralReport, cap: float = 1.0) -> RecursionLedger:
    """The γ-level form of the unit-step inequalities.

    The common slack is δ^{1/200}(τ) sup_{[τ-1,τ]} γ + exp(-δ^{-1/50}(τ)/64) + e^{2τ}.
    """
    grid, (gp, g0, gm, g, aug, delta) = unit_grid(
        report.tau, report.gamma_plus, report.gamma_0, report.gamma_minus, report.gamma, report.augment, report.delta
    )
    d = np.maximum(delta[1:], np.finfo(float).tiny)
    slack = (
        d**DELTA_POWER * np.maximum(g[:-1], g[1:])
        + np.exp(-(d ** (-1.0 / 50.0)) / 64.0)
        + np.exp(2.0 * grid[1:])
    )
    constants = {
        "gamma_plus": minimal_constant(gp[:-1] + aug[:-1] - math.exp(-1) * (gp[1:] + aug[1:]), slack),
        "gamma_0": minimal_constant(np.abs(g0[:-1] - g0[1:]), slack),
        "gamma_minus": minimal_constant(math.e * gm[1:] - gm[:-1], slack),
    }
    return RecursionLedger(grid[1:], constants, cap)


@dataclass(frozen=True)
class DichotomyResult:
    label: Dichotomy
    neutral_ratio: np.ndarray
    positive_ratio: np.ndarray


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)


def _trends_below(ratio: np.ndarray, tau: np.ndarray, threshold: float) -> bool:
    # small at the ancient end and not growing toward it
    if not np.all(np.isfinite(ratio)) or ratio[0] > threshold:
        return False
    return float(np.polyfit(tau, ratio, 1)[0]) >= 0.0


def dichotomy_classify(report: SpectralReport, threshold: float = 0.5, min_snapshots: int = 5) -> DichotomyResult:
    """Which of Γ⁰ and Γ⁺ dominates toward the small-τ end of the window.

    neutral_ratio = (Γ⁺ + Γ⁻)/Γ⁰ and positive_ratio = (Γ⁰ + Γ⁻)/Γ⁺. A ratio
    counts as dominated when it is at most ``threshold`` at the smallest τ
    and does not increase toward it.
    """
    Gp, G0, Gm = report.Gamma_plus, report.Gamma_0, report.Gamma_minus
    neutral = _ratio(Gp + Gm, G0)
    positive = _ratio(G0 + Gm, Gp)
    if len(report) < min_snapshots:
        log.warning("dichotomy needs %d snapshots, got %d", min_snapshots, len(report))
        return DichotomyResult(Dichotomy.INCONCLUSIVE, neutral, positive)
    tau = report.tau
    n_ok = _trends_below(neutral, tau, threshold)
    p_ok = _trends_below(positive, tau, threshold)
    if n_ok and not p_ok:
        label = Dichotomy.NEUTRAL
    elif p_ok and not n_ok:
        label = Dichotomy.POSITIVE
    else:
        label = Dichotomy.INCONCLUSIVE
    return DichotomyResult(label, neutral, positive)


# ----------------------------
# Neutral-mode tracking
# ----------------------------

def fit_alpha_constant(report: SpectralReport) -> float:
    """c in α(τ) ≈ 1/(cτ) by least squares on 1/τ."""
    tau, alpha = report.tau, report.alpha
    k = float(np.sum(alpha / tau) / np.sum(1.0 / tau**2))
    if k == 0:
        raise InsufficientDataError("alpha vanishes on the whole window")
    return 1.0 / k


def alpha_ode_residual(report: SpectralReport) -> np.ndarray:
    """|α' + 2α²| / A² with α' from finite differences in τ; NaN where A = 0."""
    if len(report) < 3:
        raise InsufficientDataError("alpha ODE residual needs at least 3 snapshots")
    alpha = report.alpha
    d_alpha = np.gradient(alpha, report.tau)
    A2 = report.A**2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(A2 > 0, np.abs(d_alpha + 2 * alpha**2) / np.where(A2 > 0, A2, 1.0), np.nan)


def error_norm_bound(report: SpectralReport) -> float:
    """Smallest C with ‖E‖ <= C δ^{1/200} Γ on every snapshot."""
    if report.error_norm is None:
        raise InsufficientDataError("report carries no error norms")
    C = minimal_constant(report.error_norm, np.maximum(report.delta, 0.0) ** DELTA_POWER * report.Gamma)
    return float(np.max(C, initial=0.0))
