import math

import numpy as np
import pytest
from scipy import sparse

from srblab.dynamics import DensityRaster, OrbitSpec, band_mass, central_lyapunov
from srblab.maps import FiberMap, SkewSystem, TorusPoint, fiber_deriv, skew_eval_array
from srblab.transfer import (UlamOperator, dense_spectrum, density_raster, integrate_observable,
                             load_operator, pf_apply_exact, pf_apply_fiber, pf_apply_grid,
                             save_operator, stationary_density, strata_2d, ulam_1d, ulam_2d)


def test_doubling_columns():
    op = ulam_1d(FiberMap.doubling(), n=4)
    dense = op.matrix.toarray()
    np.testing.assert_allclose(dense[:, 0], [0.5, 0.5, 0., 0.])
    np.testing.assert_allclose(dense[:, 1], [0., 0., 0.5, 0.5])
    np.testing.assert_allclose(dense[:, 2], [0.5, 0.5, 0., 0.])
    np.testing.assert_allclose(dense[:, 3], [0., 0., 0.5, 0.5])
    assert op.samples == 64


def test_doubling_stationary():
    report = stationary_density(ulam_1d(FiberMap.doubling(), n=4))
    np.testing.assert_allclose(report.stationary, 0.25, atol=1e-15)
    assert report.leading == pytest.approx(1.)
    assert report.subleading_modulus == pytest.approx(0., abs=1e-12)
    assert report.converged


def test_doubling_converges_fast():
    report = stationary_density(ulam_1d(FiberMap.doubling(), n=64), spectrum=False)
    assert report.residual <= 1e-12
    assert report.iterations <= 3
    assert math.isnan(report.subleading_modulus)


def test_preimage_method_doubling():
    op = ulam_1d(FiberMap.doubling(), n=8, method="preimage")
    dense = op.matrix.toarray()
    for j in range(8):
        expected = np.zeros(8)
        expected[(2 * j) % 8] = expected[(2 * j + 1) % 8] = 0.5
        np.testing.assert_allclose(dense[:, j], expected, atol=1e-12)
    assert op.method == "preimage"
    assert op.samples == 0


def test_sampling_close_to_preimage(bump):
    f = FiberMap.intermittent(0.01, 0.5, bump)
    sampled = ulam_1d(f, n=256).matrix.toarray()
    exact = ulam_1d(f, n=256, method="preimage").matrix.toarray()
    assert np.abs(sampled - exact).sum(axis=0).max() <= 0.2


def test_ulam_1d_validation():
    with pytest.raises(ValueError):
        ulam_1d(FiberMap.doubling(), n=16, samples_per_cell=8)
    with pytest.raises(ValueError):
        ulam_1d(FiberMap.doubling(), n=16, method="other")


def test_strata():
    assert strata_2d(7, 64) == (7, 10)
    sx, sy = strata_2d(3, 64)
    assert sx % 3 == 0 and sy % 2 == 0


def test_zero_coupling_uniform(doubling_product):
    op = ulam_2d(doubling_product, 8, 8)
    assert op.column_error() <= 1e-12
    report = stationary_density(op)
    np.testing.assert_allclose(report.stationary, 1 / 64, atol=1e-10)
    np.testing.assert_allclose(density_raster(op, report.stationary), 1., atol=1e-8)


def test_zero_coupling_base_marginal(bump):
    system = SkewSystem(7, FiberMap.intermittent(0.01, 0.5, bump), 0.)
    op = ulam_2d(system, 16, 16)
    report = stationary_density(op, spectrum=False)
    marginal = report.stationary.reshape(16, 16).sum(axis=1)
    np.testing.assert_allclose(marginal, 1 / 16, atol=1e-10)


def test_column_stochastic(experimental):
    op = ulam_2d(experimental.system(0.01), 16, 16, samples_per_cell=32, seed=7)
    assert op.column_error() <= 1e-12
    assert op.matrix.data.min() > 0
    report = stationary_density(op, spectrum=False)
    assert report.stationary.sum() == pytest.approx(1.)
    assert (report.stationary >= 0).all()


def test_ulam_deterministic(experimental):
    system = experimental.system(0.003)
    first = ulam_2d(system, 8, 8, seed=11).matrix
    second = ulam_2d(system, 8, 8, seed=11).matrix
    assert (first != second).nnz == 0


def test_not_stochastic_rejected():
    with pytest.raises(ValueError):
        UlamOperator(sparse.csc_matrix(np.full((2, 2), 0.4)), (2,), 1, 0)


def test_integrate_observable(doubling_product):
    op = ulam_2d(doubling_product, 8, 8)
    report = stationary_density(op, spectrum=False)
    assert integrate_observable(report.stationary, lambda x, y: 1., op.shape) == \
        pytest.approx(1., abs=1e-12)
    value = integrate_observable(report.stationary, lambda x, y: np.sin(2 * np.pi * x),
                                 op.shape)
    assert value == pytest.approx(0., abs=1e-12)


def test_integrate_observable_1d():
    report = stationary_density(ulam_1d(FiberMap.doubling(), n=8), spectrum=False)
    assert integrate_observable(report.stationary, lambda y: y, (8,)) == pytest.approx(0.5)


def test_pf_of_lebesgue(doubling_product):
    p = TorusPoint(0.3, 0.7)
    assert pf_apply_exact(doubling_product, lambda x, y: np.ones_like(x), p) == \
        pytest.approx(1.)
    assert pf_apply_exact(doubling_product, lambda x, y: np.zeros_like(x), p) == 0.


def test_pf_fiber_doubling():
    y = np.linspace(0.05, 0.95, 10)
    np.testing.assert_allclose(pf_apply_fiber(FiberMap.doubling(), np.ones_like, y), 1.)


def test_pf_duality(experimental):
    system = experimental.system(0.01)
    n = 128
    u = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(u, u, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    coef = np.random.default_rng(2036).normal(size=(10, 4))
    for c in coef:
        def dens(x, y):
            return 1 + 0.5 * np.sin(2 * np.pi * (x + 2 * y) + c[0]) + 0.3 * np.cos(
                2 * np.pi * y + c[1])

        def obs(x, y):
            return np.cos(2 * np.pi * (2 * x - y) + c[2]) + np.sin(2 * np.pi * y + c[3])
        fx, fy = skew_eval_array(system, gx, gy)
        left = np.mean(pf_apply_grid(system, dens, gx, gy) * obs(gx, gy))
        right = np.mean(dens(gx, gy) * obs(fx, fy))
        assert left == pytest.approx(right, abs=1e-7)


def test_save_load(tmp_path, experimental):
    op = ulam_2d(experimental.system(0.), 8, 8, seed=3)
    save_operator(op, tmp_path / "op.ulam")
    loaded = load_operator(tmp_path / "op.ulam")
    assert loaded.shape == (8, 8)
    assert loaded.seed == 3
    np.testing.assert_array_equal(loaded.matrix.toarray(), op.matrix.toarray())

    op1 = ulam_1d(FiberMap.doubling(), n=16)
    save_operator(op1, tmp_path / "op1.ulam")
    assert load_operator(tmp_path / "op1.ulam").shape == (16,)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ulam"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        load_operator(path)


def test_dense_spectrum_limit(experimental):
    op = ulam_2d(experimental.system(0.), 66, 64)
    with pytest.raises(ValueError):
        dense_spectrum(op)


def test_arpack_matches_dense(experimental):
    op = ulam_2d(experimental.system(0.01), 24, 24)
    report = stationary_density(op)
    assert op.cells > 256
    assert report.subleading_modulus == pytest.approx(dense_spectrum(op)[1], rel=1e-4)



def test_ulam_image_first_order():
    f = FiberMap.experimental(0.01)

    def u(y):
        return 1 + 0.5 * np.sin(2 * np.pi * y)

    errors = []
    for n in (64, 128, 256, 512):
        edges = np.arange(n + 1) / n
        averaged = 1 + 0.5 * n / (2 * np.pi) * (np.cos(2 * np.pi * edges[:-1])
                                                 - np.cos(2 * np.pi * edges[1:]))
        points = (np.arange(16 * n) + 0.5) / (16 * n)
        exact = pf_apply_fiber(f, u, points).reshape(n, 16).mean(axis=1)
        image = ulam_1d(f, n=n, method="preimage").matrix @ averaged
        errors.append(np.abs(exact - image).mean())
    assert math.log2(errors[0] / errors[-1]) / 3 >= 0.8


@pytest.mark.slow
def test_spectral_gap_above_critical(experimental):
    op = ulam_2d(experimental.system(0.01))
    report = stationary_density(op)
    assert report.converged
    assert report.subleading_modulus < 0.95


@pytest.mark.slow
def test_intermittent_1d_density_positive(bump):
    report = stationary_density(ulam_1d(FiberMap.intermittent(0.01, 0.5, bump)), spectrum=False)
    assert (report.stationary > 0).all()


@pytest.mark.slow
def test_density_integral_matches_birkhoff(experimental):
    system = experimental.system(0.01)
    report = stationary_density(ulam_2d(system), spectrum=False)
    integral = integrate_observable(report.stationary,
                                    lambda x, y: np.log(fiber_deriv(system.fiber, y)), (256, 256))
    chi = central_lyapunov(system, OrbitSpec(length=1_000_000)).chi_c
    assert integral == pytest.approx(chi, abs=max(0.02 * abs(chi), 5e-3))


@pytest.mark.slow
def test_trapped_stationary_mass(experimental):
    report = stationary_density(ulam_2d(experimental.system(-0.02)), spectrum=False)
    counts = np.rint(report.stationary * 1e12).astype(np.int64).reshape(256, 256)
    assert band_mass(DensityRaster(256, 256, counts, int(counts.sum())), 0.2) >= 0.99


@pytest.mark.slow
def test_zero_coupling_product(bump):
    fiber = FiberMap.intermittent(0.01, 1., bump)
    joint = stationary_density(ulam_2d(SkewSystem(7, fiber, 0.)), spectrum=False).stationary
    joint = joint.reshape(256, 256)
    marginal = stationary_density(ulam_1d(fiber, n=256, method="preimage"),
                                  spectrum=False).stationary
    np.testing.assert_allclose(joint, np.outer(np.full(256, 1 / 256), marginal), atol=1e-3)
    np.testing.assert_allclose(joint.sum(axis=1), 1 / 256, atol=1e-10)
    assert np.abs(joint.sum(axis=0) - marginal).sum() <= 0.1
