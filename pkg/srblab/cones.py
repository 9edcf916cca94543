"""Cone field around the horizontal direction and the transversality count m(F).

A cone is {|v_y| <= c0 * coupling * |v_x|}. DF_q is lower triangular,

    DF_q = [[m, 0], [-2 pi coupling sin(2 pi x_q), f'(y_q)]],

so the image of the cone is the slope interval with center -2 pi coupling sin(2 pi x_q) / m
and half-width c0 coupling f'(y_q) / m.
"""
from dataclasses import dataclass
import logging
import math
import typing as tp

import numpy as np

from . import kernels
from .maps import fiber_deriv, preimage_arrays

logger = logging.getLogger(__name__)

INVARIANCE_MARGIN = 1e-3
GUARD = 1e-12
ZERO_COUPLING_C0 = 1e-6
DERIV_CAP = 10. / 3.
DERIV_FLOOR = 2. / 3.
CHUNK = 4096
# the fiber derivative varies on the scale of the bump window, sample it finely
SLOPE_GRID = 100_000


class ConeInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class ConeParams:
    c0: float
    coupling: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"Cone constant must be positive, got {self.c0}")

    @property
    def half_width(self):
        return self.c0 * abs(self.coupling)


@dataclass(frozen=True)
class SlopeInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"Empty slope interval [{self.lo}, {self.hi}]")

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class TransversalityReport:
    """Worst-case counts over the grid, with both normalizations."""
    m: int
    c0: float
    grid_n: int
    transversal: int
    overlap: int
    det_floor: float

    @property
    def nominal_floor(self):
        return DERIV_FLOOR * self.m

    @property
    def measure(self):
        return self.transversal / self.nominal_floor

    @property
    def measure_measured_floor(self):
        return self.transversal / self.det_floor

    @property
    def overlap_measure(self):
        return self.overlap / self.nominal_floor

    @property
    def overlap_measured_floor(self):
        return self.overlap / self.det_floor

    def as_dict(self):
        return {
            "m": self.m, "c0": self.c0, "grid_n": self.grid_n,
            "transversal": self.transversal, "overlap": self.overlap,
            "det_floor": self.det_floor, "measure": self.measure,
            "measure_measured_floor": self.measure_measured_floor,
            "overlap_measure": self.overlap_measure,
            "overlap_measured_floor": self.overlap_measured_floor,
        }


def min_cone_constant(system, grid_n=1000):
    """Smallest c0 keeping DF(C) inside C with relative margin 1e-3.

    Requires (2 pi |sin 2 pi x| + f'(y) c0) / m <= (1 - 1e-3) c0 for all sampled (x, y).
    """
    if grid_n < 1000:
        raise ValueError(f"grid_n must be at least 1000, got {grid_n}")
    m = system.m
    if m <= DERIV_CAP:
        raise ConeInfeasibleError(f"No invariant cone for m={m} <= 10/3")
    if system.coupling == 0:
        return ZERO_COUPLING_C0
    grid = np.arange(grid_n) / grid_n
    sine = float(np.abs(np.sin(kernels.TWO_PI * grid)).max())
    fine = max(grid_n, SLOPE_GRID)
    slope = float(np.abs(fiber_deriv(system.fiber, np.arange(fine) / fine)).max())
    room = (1 - INVARIANCE_MARGIN) * m - slope
    if room <= 0:
        raise ConeInfeasibleError(f"Fiber derivative {slope:.4g} too large for m={m}")
    c0 = kernels.TWO_PI * sine / room
    logger.debug("c0=%.6g for m=%d (max f'=%.6g)", c0, m, slope)
    return c0


def image_slope_interval(system, q, cone):
    center = -kernels.TWO_PI * system.coupling * math.sin(kernels.TWO_PI * q.x)
    half = cone.half_width * abs(fiber_deriv(system.fiber, q.y))
    return SlopeInterval((center - half) / system.m, (center + half) / system.m)


def is_transversal(first, second, guard=GUARD):
    """Image cones meet only at the origin: the slope intervals are disjoint."""
    return first.hi + guard < second.lo or second.hi + guard < first.lo


def _grid_points(grid_n):
    u = (np.arange(grid_n) + 0.5) / grid_n
    gx, gy = np.meshgrid(u, u, indexing="ij")
    return gx.ravel(), gy.ravel()


def _counts(system, cone, grid_n):
    """Worst transversal and overlap counts over the p grid, and min f' at preimages."""
    if grid_n < 64:
        raise ValueError(f"grid_n must be at least 64, got {grid_n}")
    px, py = _grid_points(grid_n)
    best_t, best_o, floor = 0, 0, math.inf
    for start in range(0, px.size, CHUNK):
        qx, qy = preimage_arrays(system, px[start:start + CHUNK], py[start:start + CHUNK])
        slopes = np.abs(fiber_deriv(system.fiber, qy.ravel())).reshape(qy.shape)
        centers = -kernels.TWO_PI * system.coupling * np.sin(kernels.TWO_PI * qx) / system.m
        halves = cone.half_width * slopes / system.m
        trans, overlap = kernels.cone_counts(centers, halves, GUARD)
        best_t = max(best_t, int(trans.max()))
        best_o = max(best_o, int(overlap.max()))
        floor = min(floor, float(slopes.min()))
    return best_t, best_o, system.m * floor


def transversality_measure(system, cone, grid_n=256):
    """m(F): worst number of preimages transversal to one preimage, over (2/3) m."""
    transversal, _, _ = _counts(system, cone, grid_n)
    return transversal / (DERIV_FLOOR * system.m)


def overlap_measure(system, cone, grid_n=256):
    """Worst number of image cones meeting a given one (itself included), over (2/3) m."""
    _, overlap, _ = _counts(system, cone, grid_n)
    return overlap / (DERIV_FLOOR * system.m)


def transversality_report(system, cone, grid_n=256):
    transversal, overlap, floor = _counts(system, cone, grid_n)
    report = TransversalityReport(system.m, cone.c0, grid_n, transversal, overlap, floor)
    logger.info("m=%d: %d transversal, %d overlapping of %d branches (c0=%.4g)",
                system.m, transversal, overlap, system.degree, cone.c0)
    return report


def multiplier_sequence(family, ms=(7, 17, 37, 77), grid_n=256, a=0., calibrate=False):
    """Transversality reports along increasing base multipliers.

    :param calibrate: recompute c0 for every m; otherwise keep the cone of the first m.
    """
    reports: tp.List[TransversalityReport] = []
    c0 = None
    for m in ms:
        system = family.with_m(m).system(a)
        if c0 is None or calibrate:
            c0 = min_cone_constant(system)
        reports.append(transversality_report(system, ConeParams(c0, system.coupling), grid_n))
    return reports
