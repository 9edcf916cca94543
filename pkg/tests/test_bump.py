import numpy as np
import pytest

from srblab.bump import (ConstructionError, SLOPE_CAP, SLOPE_MARGIN, BumpProfile, build_phi,
                         solve_shape, validate_phi)


def _failed(bump, grid_n=10_000):
    return {c.name for c in validate_phi(bump, grid_n) if not c.passed}


def test_default_phi_conditions(bump):
    assert _failed(bump, 100_000) == set()


def test_phi_values(bump):
    assert bump.value(0.5) == pytest.approx(0.5, abs=1e-10)
    assert bump.slope(0.5) == pytest.approx(1., abs=1e-10)
    assert bump.value(0.05) == 0.
    assert bump.value(0.) == 0.
    assert bump.value(1.5) == 0.
    assert bump.value(-0.2) == 0.


def test_phi_slope_margin(bump):
    u = np.linspace(0., 1., 200_001)
    assert np.abs(bump.slope(u)).max() <= SLOPE_CAP - SLOPE_MARGIN


def test_phi_below_diagonal(bump):
    u = np.linspace(0., 1., 10_001)[1:-1]
    u = u[u != 0.5]
    assert (bump.value(u) < u).all()


def test_phi_concave_at_half(bump):
    assert bump.curvature(0.5) < 0


def test_table_matches_slopes(bump):
    # the tabulated values integrate the analytic slope
    u = np.linspace(0.2, 0.8, 7)
    h = 1e-6
    numeric = (bump.value(u + h) - bump.value(u - h)) / (2 * h)
    np.testing.assert_allclose(numeric, bump.slope(u), atol=1e-6)


def test_scaled_profile_fails_slope(bump):
    assert "(i)" in _failed(bump.scaled(1.2))


def test_zero_profile_fails_half():
    failed = _failed(BumpProfile.zero())
    assert "(iii)" in failed
    assert "(i)" not in failed


def test_validate_grid_too_small(bump):
    with pytest.raises(ValueError):
        validate_phi(bump, 100)


def test_solve_shape_layout():
    shape = solve_shape((0.02, 0.1, 1.2))
    height, depth = shape[0], shape[1]
    assert 1 < height < SLOPE_CAP
    assert depth == pytest.approx(1.2)
    assert shape[2] == pytest.approx(0.1)
    # turn starts after the rise, return ends at 1
    assert shape[4] > shape[2] + shape[3]
    assert shape[6] + shape[7] == pytest.approx(1.)


def test_too_deep_profile_rejected():
    with pytest.raises(ConstructionError):
        build_phi((0.02, 0.1, 1.4))
