import math

import numpy as np
import pytest

from srblab.dynamics import (DensityRaster, OrbitSpec, band_mass, central_lyapunov,
                             check_trapping, fiber_fixed_points, iterate, iterate_derivative,
                             occupied_bands, orbit_raster, orbit_snapshots,
                             uniform_expansion_certificate)
from srblab.maps import DomainError, FiberMap, TorusPoint


def test_iterate_fixed_point(experimental):
    system = experimental.system(-0.01)
    spec = OrbitSpec(TorusPoint(0., 0.), burn_in=0, length=5)
    points = list(iterate(system, spec))
    assert len(points) == 5
    assert all((p.x, p.y) == (0., 0.) for p in points)


def test_iterate_base_orbit(doubling_product):
    spec = OrbitSpec(TorusPoint(1 / 8, 1 / 3), burn_in=1, length=3)
    xs = [p.x for p in iterate(doubling_product, spec)]
    assert xs == [7 / 8, 1 / 8, 7 / 8]


def test_iterate_deterministic(experimental):
    system = experimental.system(0.003)
    spec = OrbitSpec(burn_in=10, length=100, seed=99)
    assert list(iterate(system, spec)) == list(iterate(system, spec))
    other = list(iterate(system, spec.with_seed(100)))
    assert other != list(iterate(system, spec))


def test_orbit_spec_validation():
    with pytest.raises(ValueError):
        OrbitSpec(length=0)
    with pytest.raises(ValueError):
        OrbitSpec(burn_in=-1)


def test_lyapunov_doubling(doubling_product):
    spec = OrbitSpec(TorusPoint(0.1, 0.2), burn_in=0, length=1000)
    estimate = central_lyapunov(doubling_product, spec)
    assert estimate.chi_c == pytest.approx(math.log(2), rel=1e-12)
    assert estimate.chi_u == pytest.approx(math.log(7))
    assert estimate.n_used == 1000


def test_lyapunov_needs_long_orbit(doubling_product):
    with pytest.raises(ValueError):
        central_lyapunov(doubling_product, OrbitSpec(length=999))


def test_raster_of_fixed_point(experimental):
    system = experimental.system(-0.01)
    raster = orbit_raster(system, OrbitSpec(TorusPoint(0., 0.), burn_in=0, length=500), 16, 16)
    assert raster.total == 500
    assert raster.counts[0, 0] == 500
    assert band_mass(raster, 0.2) == 1.
    assert occupied_bands(raster, 8) == 1


def test_raster_too_small(experimental):
    with pytest.raises(ValueError):
        orbit_raster(experimental.system(0.), OrbitSpec(length=10), 8, 8)


def test_raster_validation():
    with pytest.raises(ValueError):
        DensityRaster(2, 2, np.ones((2, 3), dtype=np.int64), 6)
    with pytest.raises(ValueError):
        DensityRaster(2, 2, np.ones((2, 2), dtype=np.int64), 5)


def test_band_mass_wraps():
    counts = np.zeros((16, 20), dtype=np.int64)
    counts[:, 0] = 1
    counts[:, 19] = 1
    counts[3, 10] = 32
    raster = DensityRaster(16, 20, counts, 64)
    # a band of two rows across y=0 holds the two edge rows
    assert band_mass(raster, 0.1) == pytest.approx(0.5)
    assert occupied_bands(raster, 4) == 3


def test_snapshots_accumulate(experimental):
    system = experimental.system(0.002)
    spec = OrbitSpec(burn_in=100, length=1000, seed=5)
    snaps = orbit_snapshots(system, spec, [300, 1100], 16, 16)
    assert snaps[300].total == 200
    assert snaps[1100].total == 1000
    assert (snaps[1100].counts >= snaps[300].counts).all()
    full = orbit_raster(system, spec, 16, 16)
    np.testing.assert_array_equal(snaps[1100].counts, full.counts)


def test_fixed_points_at_zero(bump):
    points = fiber_fixed_points(FiberMap.intermittent(0.01, 0., bump))
    assert len(points.points) == 2
    assert points.locations[0] == pytest.approx(0., abs=1e-12)
    assert points.locations[1] == pytest.approx(0.005, abs=1e-9)
    assert points.stabilities == ["repelling", "neutral"]


def test_fixed_points_below_critical(bump):
    points = fiber_fixed_points(FiberMap.intermittent(0.01, -0.05, bump))
    assert len(points.points) == 3
    assert points.locations[0] == pytest.approx(5e-4, abs=1e-12)
    assert points.stabilities == ["repelling", "attracting", "repelling"]
    assert points.locations[1] < 0.005 < points.locations[2]


def test_fixed_points_doubling():
    points = fiber_fixed_points(FiberMap.doubling(), scan_points=10_000)
    assert len(points.points) == 1
    assert points.points[0].derivative == 2.


@pytest.mark.parametrize("a", [-0.02, -0.01])
def test_trapping_holds(theoretical, a):
    report = check_trapping(theoretical.system(a), 0.01, a, 0.01)
    assert report.holds
    assert report.margin > 0
    assert report.interval == pytest.approx(((0.01 - a) * 0.01, 0.005))
    assert report.endpoint_residual <= 1e-12


def test_trapping_domain(theoretical):
    with pytest.raises(DomainError):
        check_trapping(theoretical.system(0.005), 0.01, 0.005, 0.01)
    with pytest.raises(ValueError):
        check_trapping(theoretical.system(-0.02), 0.01, -0.02, 0.01, grid_n=100)


def test_iterate_derivative_doubling():
    assert iterate_derivative(FiberMap.doubling(), 0.3, 5) == 32.


def test_expansion_certified_at_one(bump):
    cert = uniform_expansion_certificate(FiberMap.intermittent(0.01, 1., bump), n_max=2)
    assert cert.certified
    assert cert.worst_n <= 2
    assert cert.uncertified == 0


def test_expansion_fails_with_attractor(bump):
    cert = uniform_expansion_certificate(FiberMap.intermittent(0.01, -0.05, bump), n_max=50,
                                         grid_n=1000)
    assert not cert.certified
    assert cert.worst_n is None
    assert cert.uncertified > 0


def test_expansion_needs_positive_n(bump):
    with pytest.raises(ValueError):
        uniform_expansion_certificate(FiberMap.doubling(), 0)


@pytest.mark.slow
def test_trapped_orbit_negative_exponent(experimental):
    system = experimental.system(-0.02)
    spec = OrbitSpec(length=1_000_000)
    assert central_lyapunov(system, spec).chi_c < 0
    assert band_mass(orbit_raster(system, spec), 0.2) >= 0.99


@pytest.mark.slow
def test_spread_orbit_fills_bands(experimental):
    raster = orbit_raster(experimental.system(-0.002), OrbitSpec(length=1_000_000))
    assert occupied_bands(raster, 32) == 32


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_sweep_endpoints(experimental, seed):
    spec = OrbitSpec(length=1_000_000, seed=2036 + seed)
    assert central_lyapunov(experimental.system(-0.02), spec).chi_c < -1e-3
    assert central_lyapunov(experimental.system(0.02), spec).chi_c > 1e-3


@pytest.mark.slow
def test_pair_merges_at_half_window(bump):
    pairs = [fiber_fixed_points(FiberMap.intermittent(0.01, a, bump)).locations[1:]
             for a in (-0.05, -0.02, -0.01, -0.005)]
    for side in (0, 1):
        gaps = [abs(pair[side] - 0.005) for pair in pairs]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert all(lo < 0.005 < hi for lo, hi in pairs)


@pytest.mark.parametrize("a", [-0.02, 0., 0.02])
def test_central_below_unstable(experimental, theoretical, a):
    for family in (experimental, theoretical):
        estimate = central_lyapunov(family.system(a), OrbitSpec(length=10_000))
        assert estimate.chi_c < estimate.chi_u


@pytest.mark.slow
@pytest.mark.parametrize("a, sign", [(-0.02, -1), (1., 1), (2., 1)])
def test_theoretical_exponent_signs(theoretical, a, sign):
    chi = central_lyapunov(theoretical.system(a), OrbitSpec(length=1_000_000)).chi_c
    assert sign * chi > 0


@pytest.mark.slow
def test_expansion_certified_near_zero(bump):
    cert = uniform_expansion_certificate(FiberMap.intermittent(0.01, 0.001, bump), n_max=10_000)
    assert cert.certified
    assert cert.uncertified == 0
