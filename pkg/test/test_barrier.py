import math

import numpy as np
import pytest

import solab.barrier
from solab.barrier import (
    JOINT_TOL,
    T_MATCH,
    BarrierFunction,
    barrier_operator,
    construct_barrier,
    corollary_check,
    fit_theta,
    operator_of,
    outer_bound,
    outer_expansion,
    refinement_check,
    right_end,
    supersolution_check,
    u_from_profile,
    u_residual,
    verification_grid,
    verify_barrier,
)
from solab.errors import BarrierConstructionError, InsufficientDataError, ValidationError
from solab.levelset_flow import ErrorModel, FlowTrajectory, cylinder, integrate, neutral_ansatz
from solab.warped_geometry import RadialProfile

A = 100.0
R_STAR = 0.5
PROPERTIES = ("upper_C", "upper_decay", "lower_floor", "lower_neck", "tip_value", "c1_joint")


def neck_psi(x, a=A):
    return a**-2 * (x**-2 - 1) + a**-4 / 16


def neck_dpsi(x, a=A):
    return -2 * a**-2 * x**-3


def neck_barrier(a=A, n=2000) -> BarrierFunction:
    """ψ sitting exactly on the neck lower bound."""
    return BarrierFunction.from_callable(a, R_STAR, 4.0, 0.25, lambda x: neck_psi(x, a), lambda x: neck_dpsi(x, a), n=n)


def cylinders(s_values, factor=1.0) -> FlowTrajectory:
    snaps = tuple(cylinder(s, 40.0, 64).with_values(np.full(65, factor * math.sqrt(2 * s))) for s in s_values)
    return FlowTrajectory(snaps, np.array(s_values), (None,) * len(snaps), ErrorModel("zero"))


# ----------------------------
# operator and grid
# ----------------------------
@pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.0])
def test_operator_on_constants(c):
    x = np.linspace(0.1, 1.0, 10)
    np.testing.assert_allclose(barrier_operator(c, 0.0, 0.0, x), 2 * c * (1 - c) / x**2)


def test_operator_of_matches_analytic():
    x = np.linspace(0.3, 1.0, 50)
    exact = barrier_operator(x**-2, -2 * x**-3, 6 * x**-4, x)
    np.testing.assert_allclose(operator_of(lambda t: t**-2, x), exact, rtol=1e-4)


def test_right_end():
    assert right_end(100.0) == pytest.approx(1.0 + 1e-6, abs=1e-15)
    assert right_end(50.0) == pytest.approx(1.000004, abs=1e-15)


def test_verification_grid():
    x = verification_grid(0.005, 1.0001, n=500)
    assert x[0] == 0.005 and x[-1] == 1.0001
    assert np.all(np.diff(x) > 0)
    assert len(x) > 500
    # clusters at both ends
    assert np.sum(x < 0.005 + 0.01 * 0.9951) > 50
    assert np.sum(x > 1.0001 - 0.01 * 0.9951) > 50


def test_barrier_function_rejects_bad_samples():
    x = np.linspace(0.1, 1.0, 10)
    with pytest.raises(ValidationError):
        BarrierFunction(A, R_STAR, 4.0, 0.25, x, np.ones(9), np.ones(10))
    with pytest.raises(ValidationError):
        BarrierFunction(A, R_STAR, 4.0, 0.25, x[::-1], np.ones(10), np.ones(10))


# ----------------------------
# verification
# ----------------------------
def test_verify_neck_barrier_properties():
    report = verify_barrier(neck_barrier())
    assert set(PROPERTIES) <= set(report.margins)
    for name in PROPERTIES:
        assert report.margins[name] >= -1e-10, f"{name}: {report.margins[name]}"
    assert report.margins["lower_neck"] == pytest.approx(0.0, abs=1e-18)
    assert report.margins["c1_joint"] == JOINT_TOL
    assert report.fitted["r_star"] == R_STAR
    assert report.ode_margin.shape == neck_barrier().x.shape


def test_verify_flags_low_tip_value():
    b = BarrierFunction.from_callable(A, R_STAR, 4.0, 0.25, lambda x: np.full_like(x, 1e-6), np.zeros_like, n=500)
    report = verify_barrier(b)
    assert "tip_value" in report.failures
    assert not report.passed


def test_verify_rejects_wrong_span():
    x = np.linspace(0.1, 1.0, 100)
    b = BarrierFunction(A, R_STAR, 4.0, 0.25, x, neck_psi(x), neck_dpsi(x))
    with pytest.raises(ValidationError):
        verify_barrier(b)


def test_fit_theta():
    x = np.linspace(0.2, 1.0, 81)
    assert fit_theta(A, x, neck_psi(x)) == pytest.approx(0.5)
    low = neck_psi(x) - np.where(x < 0.7, 1.0, 0.0)
    assert fit_theta(A, x, low) == pytest.approx(0.31, abs=0.011)


def test_corollary_shapes_and_domain():
    b = neck_barrier()
    report = corollary_check(b, r_grid=[1.0, 5.0, 20.0], s_grid=[50.0, 60.0])
    assert report.margin.shape == (3, 2)
    assert np.all(np.isnan(report.margin[2]))
    assert np.all(np.isfinite(report.margin[:2]))


def test_refinement_needs_constructed_barrier():
    with pytest.raises(ValidationError):
        refinement_check(neck_barrier(), n=200)


def test_construct_rejects_small_parameter():
    with pytest.raises(ValidationError):
        construct_barrier(10.0)


def test_construct_without_slope_bracket(monkeypatch):
    # shallow tip slopes all blow up before the match point
    monkeypatch.setattr(solab.barrier, "SLOPE_LIMIT", 0.1)
    with pytest.raises(BarrierConstructionError) as exc:
        construct_barrier(100.0)
    assert exc.value.prop == "tip_value"
    assert exc.value.location == pytest.approx(solab.barrier.R_STAR / 100.0)


@pytest.fixture(scope="module")
def constructed() -> dict[float, BarrierFunction]:
    return {a: construct_barrier(a) for a in (50.0, 100.0)}


BUILT = [(50.0, "smallest admissible a"), (100.0, "default a")]


@pytest.mark.parametrize("a, desc", BUILT)
def test_constructed_barrier_is_verified(constructed, a, desc):
    b = constructed[a]
    assert b.provenance == "constructed", f"{desc}: provenance {b.provenance}"
    assert len(b.x) >= 10_000, f"{desc}: only {len(b.x)} samples"
    report = verify_barrier(b)
    assert report.passed, f"{desc}: fails {report.failures} at {report.worst}"
    assert b.psi[0] >= 1.5, f"{desc}: tip value {b.psi[0]}"
    assert np.min(b.psi) >= a**-4 / 32, f"{desc}: floor {np.min(b.psi) * a**4}"
    assert b.theta == pytest.approx(0.5), f"{desc}: theta {b.theta}"
    assert 0 < b.r_star < 1 and 4 <= b.N <= 64, f"{desc}: r_*={b.r_star}, N={b.N}"
    for x_j, left, right in b.joints:
        assert abs(left - right) <= JOINT_TOL, f"{desc}: slope jump {left - right} at {x_j}"


@pytest.mark.parametrize("a, desc", BUILT)
def test_constructed_barrier_is_the_outer_expansion_past_the_match(constructed, a, desc):
    b = constructed[a]
    x = b.x[b.x > T_MATCH / a]
    psi, dpsi, _ = outer_expansion(a, x)
    np.testing.assert_allclose(b.psi[-len(x):], psi, rtol=1e-14, err_msg=desc)
    np.testing.assert_allclose(b.psi_prime[-len(x):], dpsi, rtol=1e-14, err_msg=desc)


@pytest.mark.parametrize("a, desc", BUILT)
def test_constructed_barrier_corollary_on_fine_grid(constructed, a, desc):
    b = constructed[a]
    s = np.linspace(100.0, 1000.0, 200)
    r = np.linspace(b.x_min * math.sqrt(2 * s[-1]), b.x_max * math.sqrt(2 * s[0]), 200)
    report = corollary_check(b, r, s)
    assert report.margin.shape == (200, 200)
    finite = np.isfinite(report.margin)
    X = r[:, None] / np.sqrt(2 * s[None, :])
    assert finite.sum() > 10_000, f"{desc}: {finite.sum()} points inside the domain"
    assert np.any(finite & (X < b.x_joint)), f"{desc}: no point in the inner region"
    assert report.passed, f"{desc}: worst margin {np.nanmin(report.margin)}"


@pytest.mark.parametrize("a, desc", BUILT)
def test_constructed_barrier_refines(constructed, a, desc):
    refined = refinement_check(constructed[a], n=2000)
    assert set(refined.coarse) == set(refined.fine), desc
    assert all(m >= -1e-10 for m in refined.coarse.values()), f"{desc}: {refined.coarse}"
    assert refined.coarse["c1_joint"] == pytest.approx(refined.fine["c1_joint"], abs=1e-12), desc


@pytest.mark.parametrize("a, desc", BUILT)
def test_cylinder_is_below_constructed_barrier(constructed, a, desc):
    result = supersolution_check(cylinders([100.0, 80.0, 60.0]), constructed[a])
    assert result.status == "pass", f"{desc}: {result.status}"
    assert result.margin >= a**-4 / 32, f"{desc}: margin {result.margin}"


@pytest.mark.slow
def test_neutral_window_violates_rmax_hypothesis(constructed):
    s1 = math.exp(20)
    seed = neutral_ansatz(s1, 4.0, 256, cap="bryant")
    traj = integrate(seed, ErrorModel(), np.linspace(s1, 0.9 * s1, 11))
    result = supersolution_check(traj, constructed[100.0])
    # F(0) = √(2s)(1 + 1/(4 log s)) on the ansatz, far above 1 + a⁻²/100
    assert result.status == "hypothesis violated"
    assert result.passed is None
    assert 0.005 < result.hypothesis_excess < 0.02


def test_outer_expansion_derivatives():
    x = np.linspace(0.2, 1.0, 41)
    psi, dpsi, ddpsi = outer_expansion(A, x)
    h = 1e-6
    np.testing.assert_allclose(dpsi, (outer_expansion(A, x + h)[0] - outer_expansion(A, x - h)[0]) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(ddpsi, (outer_expansion(A, x + h)[1] - outer_expansion(A, x - h)[1]) / (2 * h), rtol=1e-6)
    assert outer_expansion(A, 1.0)[0] == pytest.approx(0.5 * A**-4, rel=1e-12)


def test_outer_expansion_satisfies_outer_inequality():
    x = np.linspace(4.5 / A, right_end(A), 2000)
    P = barrier_operator(*outer_expansion(A, x), x)
    assert np.all(P <= outer_bound(A, x))


# ----------------------------
# comparison on trajectories
# ----------------------------
def test_cylinder_is_below_barrier():
    result = supersolution_check(cylinders([100.0, 80.0, 60.0]), neck_barrier())
    assert result.status == "pass"
    assert result.passed is True
    assert result.margin == pytest.approx(A**-4 / 16, rel=1e-3)
    assert result.hypothesis_excess < 0


def test_supersolution_hypothesis_violated():
    result = supersolution_check(cylinders([100.0, 80.0], factor=1.01), neck_barrier())
    assert result.status == "hypothesis violated"
    assert result.passed is None
    assert result.hypothesis_excess == pytest.approx(0.01, abs=1e-5)


def test_supersolution_with_bad_parameter():
    with pytest.raises(ValidationError):
        supersolution_check(cylinders([100.0, 80.0]), 10.0)


# ----------------------------
# u-variable
# ----------------------------
def test_u_of_constant_profile():
    arcs = u_from_profile(cylinder(50.0, 20.0, 64))
    assert len(arcs) == 1
    np.testing.assert_array_equal(arcs[0].u, 0.0)


def test_u_splits_monotone_arcs():
    z = np.linspace(-3.0, 3.0, 121)
    arcs = u_from_profile(RadialProfile(z, 2.0 + np.cos(z), s=1.0))
    assert sorted(a.increasing for a in arcs) == [False, True]
    for arc in arcs:
        assert np.all(np.diff(arc.r) > 0)
        np.testing.assert_allclose(arc.u, np.sin(arc.z) ** 2, atol=2e-3)


def test_u_without_arcs():
    z = np.linspace(0.0, 1.0, 12)
    zigzag = np.where(np.arange(12) % 2 == 0, 1.0, 2.0)
    with pytest.raises(ValidationError):
        u_from_profile(RadialProfile(z, zigzag, s=1.0))


def test_u_residual_needs_arcs():
    with pytest.raises(InsufficientDataError):
        u_residual(cylinders([100.0, 80.0]))
    with pytest.raises(InsufficientDataError):
        u_residual(cylinders([100.0, 80.0, 60.0]))
