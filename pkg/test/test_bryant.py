import math

import numpy as np
import pytest

from solab.bryant import (
    G1,
    R0,
    BryantProfile,
    bryant_cap,
    bryant_rhs,
    bryant_rk4,
    compare_tip,
    scalar_curvature,
    series_coefficient,
    series_start,
    solve_bryant,
)
from solab.errors import ValidationError
from solab.levelset_flow import cylinder


@pytest.fixture(scope="module")
def bryant() -> BryantProfile:
    return solve_bryant(1000.0)


# ----------------------------
# tip series
# ----------------------------
def test_series_normalization():
    assert series_coefficient() == pytest.approx(-1.0 / 36.0)
    assert -36.0 * series_coefficient() == pytest.approx(1.0)
    assert scalar_curvature(series_start(R0)) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("r", [1e-3, 1e-2])
def test_series_solves_ode_near_tip(r):
    phi, dphi, fp = series_start(r)
    ddphi_series = 6 * (-1.0 / 36.0) * r + 20 * (87.0 / 64800.0) * r**3
    ddf_series = G1 + 3 * (-2.0 / 135.0) * r**2
    dy = bryant_rhs(r, np.array([phi, dphi, fp]))
    assert dy[0] == pytest.approx(dphi, abs=1e-15)
    assert dy[1] == pytest.approx(ddphi_series, abs=1e-7), f"phi'' at r={r}"
    assert dy[2] == pytest.approx(ddf_series, abs=1e-7), f"f'' at r={r}"


# ----------------------------
# full profile
# ----------------------------
def test_solve_bryant(bryant):
    assert bryant.r_grid[0] == 0.0 and bryant.r_grid[-1] == pytest.approx(1000.0)
    assert bryant.R[0] == 1.0
    assert bryant.identity_drift.max() <= 1e-8
    assert np.all(np.diff(bryant.phi_prime) < 0), "phi' decreases"
    assert bryant.phi_prime[-1] <= 0.05
    away = bryant.r_grid >= 0.1
    assert np.all(np.diff(bryant.R[away]) < 0), "curvature decreases away from the tip"
    assert np.all(bryant.fprime[1:] > 0)


def test_bryant_far_field(bryant):
    far = bryant.r_grid >= 100.0
    rR = bryant.r_grid[far] * bryant.R[far]
    assert np.ptp(rR) / rR.mean() <= 0.02
    assert bryant.phi[-1] == pytest.approx(math.sqrt(2000.0), rel=0.1)


def test_rk4_agrees_with_adaptive():
    reference = solve_bryant(1.0, n_points=50)
    y = bryant_rk4(1.0, 400)
    np.testing.assert_allclose(y, [reference.phi[-1], reference.phi_prime[-1], reference.fprime[-1]], atol=1e-6)


def test_solve_rejects_short_range():
    with pytest.raises(ValidationError):
        solve_bryant(R0)


# ----------------------------
# caps and tip comparison
# ----------------------------
def test_bryant_cap(bryant):
    cap, length = bryant_cap(bryant, 0.5, 3.0)
    assert length > 0
    assert float(cap(0.0)) == pytest.approx(3.0, rel=1e-9)
    assert float(cap(length)) == pytest.approx(0.0, abs=1e-12)
    d = np.linspace(0.0, length, 50)
    assert np.all(np.diff(cap(d)) < 0)


@pytest.mark.parametrize("slope", [0.0, 1.5])
def test_bryant_cap_rejects_slope(bryant, slope):
    with pytest.raises(ValidationError):
        bryant_cap(bryant, slope, 1.0)


def test_compare_tip_with_itself(bryant):
    result = compare_tip(bryant, bryant)
    assert result.status == "ok"
    assert result.discrepancy == pytest.approx(0.0, abs=1e-12)
    assert result.R_tip == 1.0
    assert result.n_points >= 20


def test_compare_tip_needs_a_tip(bryant):
    result = compare_tip(cylinder(100.0, 40.0, 64), bryant)
    assert result.status == "insufficient resolution"
    assert result.discrepancy is None
