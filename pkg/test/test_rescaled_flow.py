import math
from types import SimpleNamespace

import numpy as np
import pytest

from solab.errors import InsufficientDataError, ValidationError
from solab.levelset_flow import ErrorModel, FlowTrajectory, cylinder, rhs, sphere, two_sided_grid
from solab.rescaled_flow import (
    SQRT2,
    RescaledProfile,
    error_term,
    from_rescaled,
    g_convergence,
    g_rhs,
    minimal_constant,
    rho_max_recursion,
    to_rescaled,
    trackers,
    trackers_from_series,
    unit_grid,
)
from solab.warped_geometry import RadialProfile, finite_differences

ZERO = ErrorModel("zero")


def neutral(tau: float, xi_max: float = 4.0, n: int = 64) -> RescaledProfile:
    xi = two_sided_grid(xi_max, n)
    return RescaledProfile(xi, -(xi**2 - 2) / (4 * SQRT2 * abs(tau)), tau)


def trajectory_of(profiles) -> FlowTrajectory:
    snaps = tuple(from_rescaled(p) for p in profiles)
    return FlowTrajectory(snaps, np.array([p.s for p in snaps]), (None,) * len(snaps), ZERO)


# ----------------------------
# change of variables
# ----------------------------
def test_rescaling_round_trip():
    z = two_sided_grid(30.0, 64)
    profile = RadialProfile(z, 12.0 + np.cos(z / 10.0), s=80.0)
    r = to_rescaled(profile)
    assert r.tau == pytest.approx(-math.log(80.0))
    np.testing.assert_allclose(r.xi_grid, z / math.sqrt(80.0))
    back = from_rescaled(r)
    assert back.s == pytest.approx(80.0)
    np.testing.assert_allclose(back.z_grid, z, rtol=1e-14)
    np.testing.assert_allclose(back.F_values, profile.F_values, rtol=1e-14)


def test_cylinder_maps_to_zero():
    r = to_rescaled(cylinder(50.0, 20.0, 64))
    np.testing.assert_allclose(r.G_values, 0.0, atol=1e-14)


def test_validate_rejects_collapsed_radius():
    xi = two_sided_grid(2.0, 64)
    G = np.zeros_like(xi)
    G[10] = -2.0
    with pytest.raises(ValidationError) as excinfo:
        RescaledProfile(xi, G, -5.0).validate()
    assert excinfo.value.index == 10


# ----------------------------
# G-equation
# ----------------------------
def chain_rule_g_tau(profile: RadialProfile, model: ErrorModel) -> np.ndarray:
    """G_τ = F/(2√s) - z F_z/(2√s) - √s F_s at fixed ξ, with F_s from the level-set solver."""
    sl = slice(1, -1) if profile.closed else slice(None)
    root = math.sqrt(profile.s)
    z, F = profile.z_grid[sl], profile.F_values[sl]
    F_z, _ = finite_differences(z, F)
    out = np.full(len(profile), np.nan)
    out[sl] = F / (2 * root) - z * F_z / (2 * root) - root * rhs(profile, model)[sl]
    return out


@pytest.mark.parametrize(
    "profile, model, desc",
    [
        (RadialProfile(two_sided_grid(40.0, 128), 14.0 + np.cos(two_sided_grid(40.0, 128) / 9.0), s=100.0), ErrorModel(), "open, default errors"),
        (RadialProfile(two_sided_grid(40.0, 128), 14.0 - 0.002 * two_sided_grid(40.0, 128) ** 2, s=100.0), ZERO, "open, no errors"),
        (sphere(100.0, 128), ErrorModel(), "closed sphere, default errors"),
    ],
)
def test_g_rhs_matches_chain_rule(profile, model, desc):
    expected = chain_rule_g_tau(profile, model)
    got = g_rhs(to_rescaled(profile), model)
    assert np.array_equal(np.isnan(got), np.isnan(expected)), f"{desc}: tips differ"
    finite = np.isfinite(expected)
    err = float(np.max(np.abs(got[finite] - expected[finite])))
    assert err <= 1e-8, f"{desc}: |g_rhs - chain rule| = {err:.3g}"


def test_zero_is_fixed_point_without_errors():
    xi = two_sided_grid(4.0, 64)
    r = RescaledProfile(xi, np.zeros_like(xi), -10.0)
    np.testing.assert_allclose(g_rhs(r, ZERO), 0.0, atol=1e-15)
    np.testing.assert_allclose(error_term(r, ZERO), 0.0, atol=0.0)


def test_error_term_is_the_only_forcing_on_zero():
    xi = two_sided_grid(4.0, 64)
    r = RescaledProfile(xi, np.zeros_like(xi), -3.0)
    model = ErrorModel()
    forcing = error_term(r, model)
    assert np.all(forcing < 0)
    np.testing.assert_allclose(g_rhs(r, model), forcing, atol=1e-15)


def test_neutral_profile_is_quasi_static():
    """The neutral profile solves the linearized equation; G_τ is quadratic in 1/|τ|."""
    sizes = {}
    for tau in (-10.0, -20.0):
        rate = g_rhs(neutral(tau, xi_max=2.0), ZERO)
        sizes[tau] = float(np.max(np.abs(rate)))
    assert sizes[-10.0] < 1e-2
    assert sizes[-10.0] / sizes[-20.0] > 3.0


# ----------------------------
# trackers and recursions
# ----------------------------
def test_trackers_from_series():
    tau = np.array([1.0, 2.0, 3.0])
    tr = trackers_from_series(tau, [0.1, -0.2, 0.3], [0.1, -0.5, 0.2])
    rho_max = np.exp(tau / 4) + np.array([0.1, -0.2, 0.3])
    np.testing.assert_allclose(tr.rho_max, rho_max)
    np.testing.assert_allclose(tr.rho, np.maximum.accumulate(rho_max))
    np.testing.assert_allclose(tr.delta, tr.rho + np.array([0.1, 0.5, 0.5]))
    assert tr.window_start == 1.0


def test_trackers_of_cylinder_trajectory():
    snaps = tuple(cylinder(s, 20.0, 64) for s in (100.0, 90.0, 80.0))
    traj = FlowTrajectory(snaps, np.array([100.0, 90.0, 80.0]), (None,) * 3, ZERO)
    tr = trackers(traj)
    np.testing.assert_allclose(tr.tau, -np.log([100.0, 90.0, 80.0]))
    np.testing.assert_allclose(tr.G0, 0.0, atol=1e-14)
    np.testing.assert_allclose(tr.rho_max, np.exp(tr.tau / 4), atol=1e-14)


def test_unit_grid():
    tau = np.linspace(0.0, 2.5, 11)
    grid, (values,) = unit_grid(tau, tau**2)
    np.testing.assert_allclose(grid, [0.5, 1.5, 2.5])
    np.testing.assert_allclose(values, [0.25, 2.25, 6.25])


def test_unit_grid_needs_one_unit():
    with pytest.raises(InsufficientDataError):
        unit_grid(np.array([0.0, 0.5]), np.array([1.0, 2.0]))


def test_minimal_constant():
    C = minimal_constant(np.array([-1.0, 2.0, 3.0, 0.0]), np.array([1.0, 4.0, 0.0, 0.0]))
    assert C[0] == 0.0 and C[1] == 0.5 and C[3] == 0.0
    assert math.isinf(C[2])


@pytest.mark.parametrize(
    "rho_max,gamma,ok,desc",
    [
        (lambda t: np.exp(t / 2), lambda t: np.ones_like(t), True, "exact contraction"),
        (lambda t: np.exp(-t), lambda t: np.zeros_like(t), False, "growth backwards with no gamma"),
    ],
)
def test_rho_max_recursion(rho_max, gamma, ok, desc):
    tau = np.arange(0.0, 5.0)
    report = SimpleNamespace(tau=tau, rho_max=rho_max(tau), gamma=gamma(tau))
    ledger = rho_max_recursion(report, cap=1.0)
    assert len(ledger.tau) == 4, desc
    assert ledger.ok is ok, desc


def test_g_convergence_on_neutral_profiles():
    traj = trajectory_of(neutral(tau) for tau in (-10.0, -9.5, -9.0))
    conv = g_convergence(traj, L=4.0)
    np.testing.assert_allclose(conv.tau, [-10.0, -9.5, -9.0])
    np.testing.assert_allclose(conv.values, 0.0, atol=1e-9)
    assert conv.slope == pytest.approx(0.0, abs=1e-8)
