"""Parameter sweeps of the central exponent, sign-change bisection and smoothness of a -> mu_a."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import functools
import logging
import math
import statistics
import typing as tp

import numpy as np

from . import rng
from .dynamics import central_lyapunov
from .transfer import integrate_observable, stationary_density, ulam_2d
from .utils import LogProgress, bold

logger = logging.getLogger(__name__)

REPLICATES = 3
GRID_TOL = 1e-9


class NoBracketError(RuntimeError):
    pass


class SweepRecord(tp.NamedTuple):
    a: float
    chi_c: float
    n_iter: int
    seed: int


@dataclass(frozen=True)
class SweepTable:
    records: tp.List[SweepRecord]
    family_id: dict
    step: float

    COLUMNS = ("a", "chi_c", "n_iter", "seed")

    def __post_init__(self):
        values = [r.a for r in self.records]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("Sweep records must be sorted by strictly increasing a")
        if not all(math.isfinite(r.chi_c) for r in self.records):
            raise ValueError("Sweep contains a non finite exponent")

    def to_table(self):
        return list(self.COLUMNS), [list(r) for r in self.records]

    @property
    def a_values(self):
        return [r.a for r in self.records]

    @property
    def chi_values(self):
        return [r.chi_c for r in self.records]


@dataclass(frozen=True)
class SignChange:
    a0_bracket: tp.Tuple[float, float]
    iterations: int
    chi_at_lo: float
    chi_at_hi: float
    noisy_midpoints: int = 0

    def __post_init__(self):
        if not self.chi_at_lo < 0 < self.chi_at_hi:
            raise ValueError(f"Invalid sign change: chi {self.chi_at_lo} .. {self.chi_at_hi}")

    def as_dict(self):
        return {"a0_bracket": list(self.a0_bracket), "iterations": self.iterations,
                "chi_at_lo": self.chi_at_lo, "chi_at_hi": self.chi_at_hi,
                "noisy_midpoints": self.noisy_midpoints}


class SmoothnessRow(tp.NamedTuple):
    h: float
    first_difference: float
    second_difference: float
    slow_mixing: bool


@dataclass(frozen=True)
class SmoothnessTable:
    a_center: float
    rows: tp.List[SmoothnessRow]
    integrals: tp.Dict[float, float] = field(default_factory=dict)

    COLUMNS = ("h", "first_difference", "second_difference", "slow_mixing")

    def to_table(self):
        return list(self.COLUMNS), [[r.h, r.first_difference, r.second_difference,
                                     int(r.slow_mixing)] for r in self.rows]


def parameter_grid(a_lo, a_hi, step):
    """a_lo + k step up to a_hi, which is always the last point."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if not a_lo < a_hi:
        raise ValueError(f"Need a_lo < a_hi, got [{a_lo}, {a_hi}]")
    count = math.floor((a_hi - a_lo) / step + GRID_TOL)
    # 12 decimals keeps grid values like -0.003 exact in CSV and seeds
    grid = [round(a_lo + k * step, 12) for k in range(count + 1)]
    if a_hi - grid[-1] <= GRID_TOL * step:
        grid.pop()
    return grid + [a_hi]


def _chi(family, a, spec):
    estimate = central_lyapunov(family.system(a), spec)
    return estimate.chi_c


def sweep(family, a_lo, a_hi, step, orbit_spec, num_workers=1):
    """Central exponent on a parameter grid. Each a gets seed derive_seed(master, a)."""
    grid = parameter_grid(a_lo, a_hi, step)
    specs = [orbit_spec.with_seed(rng.derive_seed(orbit_spec.seed, a)) for a in grid]
    logger.info("Sweep %s over [%g, %g], %d points", family.name, a_lo, a_hi, len(grid))
    if num_workers > 1:
        with ProcessPoolExecutor(num_workers) as pool:
            pendings = [pool.submit(_chi, family, a, spec) for a, spec in zip(grid, specs)]
            chis = [p.result() for p in LogProgress(logger, pendings, name="Sweep")]
    else:
        chis = [_chi(family, a, spec)
                for a, spec in LogProgress(logger, list(zip(grid, specs)), name="Sweep")]
    records = [SweepRecord(a, chi, orbit_spec.length, spec.seed)
               for a, chi, spec in zip(grid, chis, specs)]
    return SweepTable(records, family.describe(), step)


def sign_changes(table):
    """Consecutive record pairs across which chi_c changes sign."""
    return [(r, s) for r, s in zip(table.records, table.records[1:])
            if (r.chi_c < 0) != (s.chi_c < 0)]


def _median_chi(family, a, orbit_spec, salt):
    chis = []
    for replicate in range(REPLICATES):
        seed = rng.derive_seed(orbit_spec.seed, a, replicate + REPLICATES * salt)
        chis.append(_chi(family, a, orbit_spec.with_seed(seed)))
    return statistics.median(chis), chis


def find_sign_change(family, bracket, orbit_spec, resolution=1e-4):
    """Bisect a to a bracket of width <= resolution with chi_c(lo) < 0 < chi_c(hi).

    The sign at each point is the sign of the median over 3 seeds. When the 3 signs at a
    midpoint disagree, the previous (wider) bracket is restored and the step is retried
    with fresh seeds, once per midpoint. A midpoint that stays noisy keeps its median sign.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError(f"Invalid bracket [{lo}, {hi}]")
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    chi_lo, _ = _median_chi(family, lo, orbit_spec, 0)
    chi_hi, _ = _median_chi(family, hi, orbit_spec, 0)
    if not chi_lo < 0 < chi_hi:
        raise NoBracketError(
            f"chi_c does not change sign on [{lo}, {hi}]: {chi_lo:.3g}, {chi_hi:.3g}")

    history = []
    salt = 0
    retried = set()
    noisy = 0
    iterations = 0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        chi_mid, chis = _median_chi(family, mid, orbit_spec, salt)
        iterations += 1
        if len({c < 0 for c in chis}) > 1:
            noisy += 1
            logger.warning("Noisy midpoint a=%.6g: chi_c over seeds %s", mid,
                           ", ".join(f"{c:.3g}" for c in chis))
            if mid not in retried and history:
                retried.add(mid)
                lo, hi, chi_lo, chi_hi = history.pop()
                salt += 1
                continue
        history.append((lo, hi, chi_lo, chi_hi))
        if chi_mid < 0:
            lo, chi_lo = mid, chi_mid
        else:
            hi, chi_hi = mid, chi_mid
        logger.debug("Bisection %d: [%.6g, %.6g]", iterations, lo, hi)
    logger.info(bold(f"Sign change of chi_c in [{lo:.6g}, {hi:.6g}]"))
    return SignChange((lo, hi), iterations, chi_lo, chi_hi, noisy)


def observable(name, band=(0., 1.)):
    """Named observables of y usable in worker processes."""
    if name == "one":
        return _one
    if name == "sin2piy":
        return _sin_2pi_y
    if name == "band":
        return functools.partial(_band, lo=band[0], hi=band[1])
    raise ValueError(f"Unknown observable {name!r}")


def _one(x, y):
    return np.ones_like(y)


def _sin_2pi_y(x, y):
    return np.sin(2 * np.pi * y)


def _band(x, y, lo, hi):
    """Indicator of y in the cyclic band [lo, hi]."""
    width = (hi - lo) % 1. if hi - lo < 1 else 1.
    return (((np.asarray(y) - lo) % 1.) <= width).astype(np.float64)


def _integral(family, a, psi, nx, ny, samples_per_cell, seed):
    op = ulam_2d(family.system(a), nx, ny, samples_per_cell, seed)
    report = stationary_density(op, near_critical=family.near_critical(a), spectrum=False)
    return integrate_observable(report.stationary, psi, op.shape), report.slow_mixing


def smoothness_diagnostic(family, a_center, h_list, psi, nx=128, ny=128, samples_per_cell=64,
                          seed=2036, num_workers=1):
    """Finite differences of I(a) = integral of psi against the Ulam SRB density.

    Every a uses the same Ulam seed, so the sampling noise is shared along the ladder.

    :param psi: observable psi(x, y) on arrays, picklable when num_workers > 1.
    :param h_list: step ladder, e.g. (4e-4, 2e-4, 1e-4).
    """
    if not h_list:
        raise ValueError("Empty step ladder")
    if abs(a_center - family.critical_a) < max(h_list):
        raise ValueError(f"a_center={a_center} within {max(h_list)} of the critical "
                         f"parameter {family.critical_a}")
    points = sorted({a_center} | {round(a_center + s * h, 15) for h in h_list for s in (-1, 1)})
    args = (psi, nx, ny, samples_per_cell, seed)
    if num_workers > 1:
        with ProcessPoolExecutor(num_workers) as pool:
            pendings = [pool.submit(_integral, family, a, *args) for a in points]
            results = [p.result() for p in LogProgress(logger, pendings, name="Smoothness")]
    else:
        results = [_integral(family, a, *args)
                   for a in LogProgress(logger, points, name="Smoothness")]
    values = {a: v for a, (v, _) in zip(points, results)}
    slow = {a: s for a, (_, s) in zip(points, results)}

    rows = []
    center = values[a_center]
    for h in h_list:
        left = round(a_center - h, 15)
        right = round(a_center + h, 15)
        first = (values[right] - values[left]) / (2 * h)
        second = (values[right] - 2 * center + values[left]) / h ** 2
        flagged = slow[left] or slow[right] or slow[a_center]
        if flagged:
            logger.warning("Slow mixing near a=%g, h=%g: differences unreliable", a_center, h)
        rows.append(SmoothnessRow(h, first, second, flagged))
    return SmoothnessTable(a_center, rows, values)
