"""The bump phi that turns the doubling map into an intermittent one.

phi is required to satisfy

    (i)   0 <= phi <= 1 and |phi'| <= 4/3,
    (ii)  phi = 0 outside [1/10, 1],
    (iii) phi(1/2) = 1/2, phi'(1/2) = 1 and phi''(1/2) < 0,
    (iv)  phi(y) < y for y in (0, 1) other than 1/2.

Its derivative s = phi' is assembled from smooth steps psi(t) = e(t) / (e(t) + e(1 - t)),
e(t) = exp(-1/t):

    s = H psi((u - 1/10) / w1) - (H + L) psi((u - c) / w2) + L psi((u - 1 + w3) / w3)

which rises to a plateau H, turns down through the value 1 at u = 1/2, sits on -L and
comes back to 0 at u = 1. The free parameters are (w1, w2, L); H, c and w3 are solved
so that phi(1/2) = 1/2, s(1/2) = 1 and phi(1) = 0.
"""
from dataclasses import dataclass
import logging
import typing as tp

import numpy as np
from scipy import integrate, optimize

from . import kernels

logger = logging.getLogger(__name__)

RISE = (0.1, 0.5)
FALL = (0.5, 1.0)
SLOPE_CAP = 4. / 3.
SLOPE_MARGIN = 1e-3
TABLE_SIZE = 2 ** 16
# (rise width w1, turn width w2, fall depth L)
DEFAULT_PARAMS = (0.02, 0.1, 1.2)

ZERO_TOL = 1e-12
HALF_TOL = 1e-10
CURVATURE_STEP = 1e-4


class ConstructionError(RuntimeError):
    pass


class Condition(tp.NamedTuple):
    name: str
    passed: bool
    margin: float
    worst: float


@dataclass(frozen=True, eq=False)
class BumpProfile:
    """Tabulated phi: values and analytic slopes at TABLE_SIZE + 1 nodes of [0, 1]."""
    profile_params: tp.Tuple[float, ...]
    shape: np.ndarray
    table: np.ndarray
    slopes: np.ndarray
    rise_interval: tp.Tuple[float, float] = RISE
    fall_interval: tp.Tuple[float, float] = FALL

    def value(self, u):
        us = np.atleast_1d(np.asarray(u, dtype=np.float64))
        out = kernels.profile_value_array(us, self.table, self.slopes)
        return out if np.ndim(u) else float(out[0])

    def slope(self, u):
        us = np.atleast_1d(np.asarray(u, dtype=np.float64))
        out = kernels.profile_slope_array(us, self.shape)
        return out if np.ndim(u) else float(out[0])

    def curvature(self, u):
        us = np.atleast_1d(np.asarray(u, dtype=np.float64))
        out = kernels.profile_curvature_array(us, self.shape)
        return out if np.ndim(u) else float(out[0])

    @property
    def samples(self):
        y = np.linspace(0., 1., len(self.table))
        return y, self.table, self.slopes

    def scaled(self, factor):
        """Same profile with phi multiplied by `factor`. Not validated."""
        shape = self.shape.copy()
        shape[kernels.SCALE] *= factor
        return BumpProfile(self.profile_params, shape, self.table * factor, self.slopes * factor)

    @classmethod
    def zero(cls, size=TABLE_SIZE):
        shape = np.array([0., 0., RISE[0], 1., RISE[1], 1., FALL[1], 1., 1.])
        return cls((), shape, np.zeros(size + 1), np.zeros(size + 1))


def _step_integral(t):
    """Integral of psi over [0, t]."""
    if t <= 0:
        return 0.
    if t >= 1:
        return 0.5 + (t - 1)
    value, _ = integrate.quad(kernels.smooth_step, 0., t, epsabs=1e-15, epsrel=1e-13, limit=200)
    return value


def solve_shape(profile_params):
    """Solve the remaining smooth-step parameters for (w1, w2, L).

    :param profile_params: rise width, turn width and fall depth.
    :return: shape vector in the layout of `srblab.kernels`.
    """
    w1, w2, depth = profile_params
    span = RISE[1] - RISE[0] - w1 / 2

    def plateau(t):
        beta = w2 * _step_integral(t) / kernels.smooth_step(t)
        return (0.5 - beta) / (span - beta)

    def depth_gap(t):
        height = plateau(t)
        return (height - 1) / kernels.smooth_step(t) - height - depth

    try:
        t = optimize.brentq(depth_gap, 0.05, 0.5, xtol=1e-15, rtol=1e-15)
    except ValueError as err:
        raise ConstructionError(f"No turn position for params {profile_params}: {err}")
    height = plateau(t)
    drop = (height - 1) / kernels.smooth_step(t)
    turn_start = RISE[1] - t * w2
    tail = w2 * (0.5 - _step_integral(t)) + (1 - turn_start - w2)
    w3 = 2 * (drop * tail - (1 + height) / 2) / depth
    logger.debug("phi shape: H=%.6f L=%.6f turn=%.6f w3=%.6f", height, depth, turn_start, w3)

    cap = SLOPE_CAP - SLOPE_MARGIN
    if not 0 < w3 <= FALL[1] - turn_start - w2:
        raise ConstructionError(f"Return width {w3:.4g} does not fit for params {profile_params}")
    if turn_start < RISE[0] + w1:
        raise ConstructionError(f"Turn starts at {turn_start:.4g}, inside the rise")
    if height > cap or depth > cap:
        raise ConstructionError(f"Plateaus H={height:.6f}, L={depth:.6f} exceed {cap:.6f}")
    return np.array([height, depth, RISE[0], w1, turn_start, w2, FALL[1] - w3, w3, 1.])


def _tabulate(shape, size=TABLE_SIZE, order=8):
    nodes = np.linspace(0., 1., size + 1)
    gl_x, gl_w = np.polynomial.legendre.leggauss(order)
    half = 0.5 / size
    centers = 0.5 * (nodes[:-1] + nodes[1:])
    points = (centers[:, None] + half * gl_x[None, :]).ravel()
    values = kernels.profile_slope_array(points, shape).reshape(size, order)
    pieces = half * values @ gl_w
    table = np.concatenate([[0.], np.cumsum(pieces)])
    slopes = kernels.profile_slope_array(nodes, shape)
    return table, slopes


def build_phi(profile_params=DEFAULT_PARAMS, grid_n=100_000):
    """Construct phi and check conditions (i)-(iv) on `grid_n` points."""
    profile_params = tuple(float(p) for p in profile_params)
    shape = solve_shape(profile_params)
    table, slopes = _tabulate(shape)
    bump = BumpProfile(profile_params, shape, table, slopes)
    failed = [c for c in validate_phi(bump, grid_n) if not c.passed]
    if failed:
        names = ", ".join(f"{c.name} (margin {c.margin:.3g})" for c in failed)
        raise ConstructionError(f"phi with params {profile_params} fails {names}")
    return bump


def validate_phi(bump, grid_n=100_000):
    """validate_phi.

    :param bump: the profile to check.
    :param grid_n: number of grid intervals on [0, 1], at least 1000.
    :return: one Condition per requirement (i)-(iv).
    """
    if grid_n < 1000:
        raise ValueError(f"grid_n must be at least 1000, got {grid_n}")
    y = np.linspace(0., 1., grid_n + 1)
    phi = bump.value(y)
    dphi = bump.slope(y)
    report = []

    worst = float(np.abs(dphi).max())
    margin = min(SLOPE_CAP - worst, 1 - float(phi.max()), float(phi.min()) + ZERO_TOL)
    report.append(Condition("(i)", margin > 0, margin, worst))

    outside = np.concatenate([y[y < RISE[0]], y[y > 0] + 1, -y[y > 0]])
    worst = float(np.abs(bump.value(outside)).max())
    margin = ZERO_TOL - worst
    report.append(Condition("(ii)", margin > 0, margin, worst))

    h = CURVATURE_STEP
    left, mid, right = bump.value(np.array([0.5 - h, 0.5, 0.5 + h]))
    second = (left - 2 * mid + right) / h ** 2
    margin = min(HALF_TOL - abs(mid - 0.5), HALF_TOL - abs(bump.slope(0.5) - 1), -second)
    report.append(Condition("(iii)", margin > 0, margin, float(mid)))

    inner = (y > 0) & (y < 1) & (y != 0.5)
    gap = y[inner] - phi[inner]
    margin = float(gap.min())
    report.append(Condition("(iv)", margin > 0, margin, -margin))

    for cond in report:
        logger.debug("phi %s passed=%s margin=%.3g", cond.name, cond.passed, cond.margin)
    return report
