"""Orbits, Lyapunov exponents, fixed points, trapping regions and expansion."""
from dataclasses import dataclass, replace
import logging
import math
import typing as tp

import numpy as np
from scipy import optimize

from . import kernels, rng
from .maps import (DomainError, FiberMap, TorusPoint, fiber_curvature, fiber_deriv, fiber_lift,
                   skew_eval_array)

logger = logging.getLogger(__name__)

CHUNK = 1 << 16
NEUTRAL_TOL = 1e-6
RESIDUAL_TOL = 1e-12
SCAN_POINTS = 1_000_000
CURVATURE_BINS = 1 << 16


@dataclass(frozen=True)
class OrbitSpec:
    """How to run one orbit. With `initial` unset, the start is drawn from `seed`."""
    initial: tp.Optional[TorusPoint] = None
    burn_in: int = 1000
    length: int = 1_000_000
    seed: int = 2036

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"Orbit length must be positive, got {self.length}")
        if self.burn_in < 0:
            raise ValueError(f"Burn-in must be nonnegative, got {self.burn_in}")
        object.__setattr__(self, "seed", int(self.seed) & rng.MASK)

    def start(self):
        if self.initial is not None:
            return self.initial
        return TorusPoint(*rng.random_point(self.seed))

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass(frozen=True)
class LyapunovEstimate:
    chi_c: float
    chi_u: float
    n_used: int
    initial_used: TorusPoint


@dataclass(frozen=True, eq=False)
class DensityRaster:
    """Orbit counts, counts[i, j] for x in cell i and y in cell j."""
    nx: int
    ny: int
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if self.counts.shape != (self.nx, self.ny):
            raise ValueError(f"counts shape {self.counts.shape} != ({self.nx}, {self.ny})")
        if int(self.counts.sum()) != self.total:
            raise ValueError("raster total does not match its counts")


class FixedPoint(tp.NamedTuple):
    location: float
    derivative: float
    stability: str


@dataclass(frozen=True)
class FiberFixedPoints:
    points: tp.List[FixedPoint]

    @property
    def locations(self):
        return [p.location for p in self.points]

    @property
    def stabilities(self):
        return [p.stability for p in self.points]


@dataclass(frozen=True)
class TrappingReport:
    holds: bool
    margin: float
    interval: tp.Tuple[float, float]
    endpoint_residual: float


@dataclass(frozen=True)
class ExpansionCertificate:
    certified: bool
    worst_n: tp.Optional[int]
    uncertified: int
    grid_n: int


def iterate(system, spec):
    """Yield the orbit points with indices in [burn_in, burn_in + length)."""
    args = system.kernel_args
    start = spec.start()
    x, y = kernels.advance(*args, start.x, start.y, spec.burn_in)
    remaining = spec.length
    while remaining > 0:
        n = min(CHUNK, remaining)
        xs, ys, x, y = kernels.orbit_chunk(*args, x, y, n)
        for px, py in zip(xs, ys):
            yield TorusPoint(px, py)
        remaining -= n


def central_lyapunov(system, spec):
    """Birkhoff average of log f'(y) along the orbit, and log m for the base."""
    if spec.length < 1000:
        raise ValueError(f"Lyapunov estimates need at least 1000 iterates, got {spec.length}")
    args = system.kernel_args
    start = spec.start()
    x, y = kernels.advance(*args, start.x, start.y, spec.burn_in)
    total, _, _ = kernels.orbit_log_slope(*args, x, y, spec.length)
    chi_c = total / spec.length
    logger.debug("chi_c=%.6g from (%.6f, %.6f), %d iterates", chi_c, start.x, start.y,
                 spec.length)
    return LyapunovEstimate(chi_c, math.log(system.m), spec.length, start)


def orbit_raster(system, spec, nx=512, ny=512):
    if nx < 16 or ny < 16:
        raise ValueError(f"Raster must be at least 16x16, got {nx}x{ny}")
    args = system.kernel_args
    start = spec.start()
    x, y = kernels.advance(*args, start.x, start.y, spec.burn_in)
    counts, _, _ = kernels.orbit_histogram(*args, x, y, spec.length, nx, ny)
    return DensityRaster(nx, ny, counts, spec.length)


def orbit_snapshots(system, spec, times, nx=512, ny=512):
    """Rasters of one orbit drawn from time `burn_in` up to each of `times`."""
    args = system.kernel_args
    start = spec.start()
    x, y = kernels.advance(*args, start.x, start.y, spec.burn_in)
    counts = np.zeros((nx, ny), dtype=np.int64)
    done = spec.burn_in
    out = {}
    for t in sorted(times):
        if t <= done and t != spec.burn_in:
            raise ValueError(f"Snapshot time {t} is before the burn-in {spec.burn_in}")
        part, x, y = kernels.orbit_histogram(*args, x, y, t - done, nx, ny)
        counts += part
        done = t
        out[t] = DensityRaster(nx, ny, counts.copy(), t - spec.burn_in)
    return out


def band_mass(raster, height):
    """Largest mass fraction inside a horizontal band of the given height, wrapping at y=0."""
    rows = raster.counts.sum(axis=0).astype(np.float64)
    total = rows.sum()
    if total == 0:
        return 0.
    width = max(1, int(round(height * raster.ny)))
    cyclic = np.concatenate([rows, rows[:width - 1]])
    windows = np.convolve(cyclic, np.ones(width), mode="valid")[:raster.ny]
    return float(windows.max() / total)


def occupied_bands(raster, bands=32):
    rows = raster.counts.sum(axis=0)
    return sum(int(chunk.sum() > 0) for chunk in np.array_split(rows, bands))


def iterate_derivative(fiber, y, n):
    """(f^n)'(y)."""
    ys = np.atleast_1d(np.asarray(y, dtype=np.float64))
    out = kernels.iterate_slope_array(fiber.params, ys, int(n))
    return out if np.ndim(y) else float(out[0])


def _classify(derivative):
    if abs(abs(derivative) - 1) <= NEUTRAL_TOL:
        return "neutral"
    return "attracting" if abs(derivative) < 1 else "repelling"


def fiber_fixed_points(fiber, scan_points=SCAN_POINTS):
    """Zeros of lift(y) - y modulo integers on [0, 1), with their stability.

    Sign changes are refined by Brent's method; tangential zeros (local minima of
    |lift(y) - y| that touch 0) by bounded minimization.
    """
    params = fiber.params

    def gap(y):
        h = kernels.lift(params, y) - y
        return h - round(h)

    y = np.arange(scan_points) / scan_points
    h = kernels.lift_array(params, y) - y
    g = h - np.round(h)
    candidates = [float(v) for v in y[np.abs(g) <= RESIDUAL_TOL]]

    right = np.append(g[1:], gap(1.))
    for i in np.flatnonzero(g * right < 0):
        lo = y[i]
        hi = y[i + 1] if i + 1 < scan_points else 1.
        root = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        if abs(gap(root)) <= RESIDUAL_TOL:
            candidates.append(root)

    a = np.abs(g)
    inner = np.arange(1, scan_points - 1)
    touch = inner[(a[inner] <= a[inner - 1]) & (a[inner] <= a[inner + 1]) & (a[inner] < 1e-6)
                  & (a[inner] > RESIDUAL_TOL)]
    for i in touch:
        res = optimize.minimize_scalar(lambda v: abs(gap(v)), bounds=(y[i - 1], y[i + 1]),
                                       method="bounded", options={"xatol": 1e-15})
        if abs(gap(res.x)) <= RESIDUAL_TOL:
            candidates.append(float(res.x))

    merged = []
    for root in sorted(candidates):
        if merged and root - merged[-1] <= 1e-9:
            if abs(gap(root)) < abs(gap(merged[-1])):
                merged[-1] = root
            continue
        merged.append(root)
    points = []
    for root in merged:
        d = fiber_deriv(fiber, root)
        points.append(FixedPoint(root, d, _classify(d)))
    logger.debug("Fixed points of %s: %s", fiber.kind.name, points)
    return FiberFixedPoints(points)


def check_trapping(system, epsilon, a, delta, grid_n=1000):
    """Check F(W) inside W for W = T x ((delta - a) eps, eps / 2).

    :param system: the theoretical family at parameter a.
    :param grid_n: samples per axis.
    """
    if a + delta > 0:
        raise DomainError(f"Trapping needs a + delta <= 0, got a={a}, delta={delta}")
    if grid_n < 1000:
        raise ValueError(f"grid_n must be at least 1000, got {grid_n}")
    lo, hi = (delta - a) * epsilon, epsilon / 2
    if lo >= hi:
        raise DomainError(f"Empty trapping interval ({lo}, {hi})")
    xs = np.arange(grid_n) / grid_n
    ys = lo + (np.arange(grid_n) + 0.5) / grid_n * (hi - lo)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    _, img = skew_eval_array(system, gx.ravel(), gy.ravel())
    margin = float(np.minimum(img - lo, hi - img).min())

    shifted = FiberMap.intermittent(epsilon, a - delta, system.fiber.bump)
    residual = abs(fiber_lift(shifted, lo) - lo)
    logger.info("Trapping a=%g: margin %.3g, endpoint residual %.3g", a, margin, residual)
    return TrappingReport(margin > 0, margin, (lo, hi), residual)


def curvature_bins(fiber, bins=CURVATURE_BINS, per_bin=8):
    """Max |f''| per bin of [0, 1), widened to the neighbouring bins."""
    points = ((np.arange(bins)[:, None] + np.linspace(0., 1., per_bin + 1)[None, :]) / bins)
    points = np.ascontiguousarray(points.ravel())
    values = np.abs(fiber_curvature(fiber, points)).reshape(bins, per_bin + 1)
    peak = values.max(axis=1)
    peak = np.maximum.reduce([peak, np.roll(peak, 1), np.roll(peak, -1)])
    return np.ascontiguousarray(1.05 * peak)


def uniform_expansion_certificate(fiber, n_max, grid_n=100_000):
    """Find, for each grid cell, the least n <= n_max with (f^n)' > 1 on the whole cell."""
    if n_max < 1:
        raise ValueError(f"n_max must be positive, got {n_max}")
    bins = curvature_bins(fiber)
    found, _ = kernels.expansion_certificate(fiber.params, bins, float(bins.max()),
                                             int(grid_n), int(n_max))
    missing = int((found == 0).sum())
    certified = missing == 0
    worst = int(found.max()) if certified else None
    if not certified:
        logger.info("Expansion not certified on %d of %d cells", missing, grid_n)
    return ExpansionCertificate(certified, worst, missing, grid_n)
