"""Circle maps, the torus skew product built on them, and their preimages."""
from dataclasses import dataclass, replace
import enum
import functools
import logging
import math
import typing as tp

import numpy as np

from . import kernels
from .bump import BumpProfile, build_phi

logger = logging.getLogger(__name__)

MAX_EPSILON = 0.01
ROOT_TOL = 1e-12


class BracketError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class FiberKind(enum.IntEnum):
    DOUBLING = kernels.DOUBLING
    INTERMITTENT = kernels.INTERMITTENT
    EXPERIMENTAL = kernels.EXPERIMENTAL


_NO_TABLE = np.zeros(2)
_NO_SHAPE = np.array([0., 0., 0.1, 1., 0.5, 1., 1., 1., 1.])


@functools.lru_cache(maxsize=None)
def default_bump():
    return build_phi()


def _wrap(v):
    r = v - math.floor(v)
    return 0. if r >= 1. else r


def _as_array(v):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(v, dtype=np.float64)))


def _unwrap(out, like):
    return out if np.ndim(like) else float(out[0])


@dataclass(frozen=True, eq=False)
class FiberMap:
    """Degree-2 circle map, evaluated through its lift.

    Args:
        kind: doubling, intermittent (doubling with phi carved into [0, epsilon]) or the
            closed-form experimental map.
        epsilon: window width of the intermittent map.
        offset_a: the parameter a. The lift is shifted by a*epsilon (intermittent)
            or by a (other kinds).
        bump: phi, intermittent only.
    """
    kind: FiberKind
    epsilon: float = 0.
    offset_a: float = 0.
    bump: tp.Optional[BumpProfile] = None

    def __post_init__(self):
        if self.kind == FiberKind.INTERMITTENT:
            if not 0 < self.epsilon <= MAX_EPSILON:
                raise DomainError(f"epsilon must lie in (0, {MAX_EPSILON}], got {self.epsilon}")
            if self.bump is None:
                object.__setattr__(self, "bump", default_bump())

    @classmethod
    def doubling(cls, a=0.):
        return cls(FiberKind.DOUBLING, offset_a=a)

    @classmethod
    def intermittent(cls, epsilon=0.01, a=0., bump=None):
        return cls(FiberKind.INTERMITTENT, epsilon=epsilon, offset_a=a, bump=bump)

    @classmethod
    def experimental(cls, a=0.):
        return cls(FiberKind.EXPERIMENTAL, offset_a=a)

    @property
    def offset(self):
        if self.kind == FiberKind.INTERMITTENT:
            return self.offset_a * self.epsilon
        return self.offset_a

    @functools.cached_property
    def params(self):
        if self.kind == FiberKind.INTERMITTENT:
            table = np.ascontiguousarray(self.bump.table)
            slopes = np.ascontiguousarray(self.bump.slopes)
            shape = np.ascontiguousarray(self.bump.shape)
        else:
            table, slopes, shape = _NO_TABLE, _NO_TABLE, _NO_SHAPE
        return (int(self.kind), float(self.epsilon), float(self.offset), table, slopes, shape)

    @functools.cached_property
    def branch_point(self):
        """The y* in (0, 1) with lift(y*) = lift(0) + 1."""
        target = kernels.lift(self.params, 0.) + 1
        point, status = kernels.bisect_lift(self.params, target, 0., 1., 1e-15)
        if status:
            raise BracketError(f"{self.kind.name} lift is not increasing on [0, 1]")
        return point

    def describe(self):
        out = {"kind": self.kind.name.lower(), "a": self.offset_a}
        if self.kind == FiberKind.INTERMITTENT:
            out["epsilon"] = self.epsilon
            out["phi_params"] = list(self.bump.profile_params)
        return out

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("params", None)
        state.pop("branch_point", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


def fiber_lift(f, y):
    """Lift of f on the real line, f(y + 1) = f(y) + 2."""
    return _unwrap(kernels.lift_array(f.params, _as_array(y)), y)


def fiber_eval(f, y):
    """f(y) reduced to [0, 1)."""
    values = kernels.lift_array(f.params, _as_array(y))
    values -= np.floor(values)
    values[values >= 1] = 0.
    return _unwrap(values, y)


def fiber_deriv(f, y):
    return _unwrap(kernels.slope_array(f.params, _as_array(y)), y)


def fiber_curvature(f, y):
    return _unwrap(kernels.curvature_array(f.params, _as_array(y)), y)


def fiber_preimages(f, y, tol=ROOT_TOL):
    """Both preimages of every y, shape (n, 2): one per monotone branch of the lift."""
    roots, status = kernels.fiber_preimage_array(f.params, f.branch_point, _as_array(y), tol)
    if status:
        raise BracketError(f"{status} fiber preimage branches of {f.kind.name} not bracketed")
    return roots


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _wrap(float(self.x)))
        object.__setattr__(self, "y", _wrap(float(self.y)))

    def distance(self, other):
        dx = abs(self.x - other.x)
        dy = abs(self.y - other.y)
        return math.hypot(min(dx, 1 - dx), min(dy, 1 - dy))


@dataclass(frozen=True, eq=False)
class SkewSystem:
    """F(x, y) = (m x, fiber(y) + coupling cos(2 pi x) + fiber_offset), both mod 1.

    The parameter a lives in `fiber.offset_a`; `fiber_offset` stays 0 for the
    families built by `Family` and is there for hand-made systems.
    """
    m: int
    fiber: FiberMap
    coupling: float = 0.
    fiber_offset: float = 0.

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m}")

    @property
    def kernel_args(self):
        return self.fiber.params, int(self.m), float(self.coupling), float(self.fiber_offset)

    @property
    def degree(self):
        return 2 * self.m


def skew_eval(system, p):
    x, y = kernels.skew_step(*system.kernel_args, p.x, p.y)
    return TorusPoint(x, y)


def skew_eval_array(system, x, y):
    return kernels.skew_step_array(*system.kernel_args, _as_array(x), _as_array(y))


def skew_jacobian(system, p):
    """Lower triangular DF at p and its determinant m * f'(y)."""
    dy = fiber_deriv(system.fiber, p.y)
    shear = -2 * math.pi * system.coupling * math.sin(2 * math.pi * p.x)
    matrix = np.array([[float(system.m), 0.], [shear, dy]])
    return matrix, system.m * dy


def preimage_arrays(system, x, y, tol=ROOT_TOL):
    """All 2m preimages of each point, as two (n, 2m) arrays."""
    params, m, coupling, shift = system.kernel_args
    qx, qy, status = kernels.skew_preimage_array(
        params, system.fiber.branch_point, m, coupling, shift, _as_array(x), _as_array(y), tol)
    if status:
        raise BracketError(f"{status} preimage branches not bracketed, fiber lift corrupted?")
    return qx, qy


def preimages(system, p, tol=ROOT_TOL):
    qx, qy = preimage_arrays(system, p.x, p.y, tol)
    return [TorusPoint(x, y) for x, y in zip(qx[0], qy[0])]


@dataclass(frozen=True, eq=False)
class Family:
    """One of the two one-parameter families a -> F_a.

    theoretical: F_a(x, y) = (m x, f_{eps,a}(y) + delta eps cos 2 pi x)
    experimental: F_a(x, y) = (m x, f(y) + delta cos 2 pi x + a)
    """
    name: str
    m: int = 7
    delta: float = 0.01
    epsilon: float = 0.01
    bump: tp.Optional[BumpProfile] = None

    def __post_init__(self):
        if self.name not in ("theoretical", "experimental"):
            raise DomainError(f"Unknown family {self.name!r}")

    @classmethod
    def theoretical(cls, epsilon=0.01, delta=0.01, m=7, bump=None):
        return cls("theoretical", m=m, delta=delta, epsilon=epsilon, bump=bump)

    @classmethod
    def experimental(cls, delta=0.01, m=7):
        return cls("experimental", m=m, delta=delta)

    @property
    def critical_a(self):
        return -self.delta

    def near_critical(self, a, width=1e-3):
        return abs(a - self.critical_a) <= width

    def fiber(self, a):
        if self.name == "theoretical":
            return FiberMap.intermittent(self.epsilon, a, self.bump)
        return FiberMap.experimental(a)

    def system(self, a):
        coupling = self.delta * self.epsilon if self.name == "theoretical" else self.delta
        return SkewSystem(self.m, self.fiber(a), coupling)

    def with_m(self, m):
        return replace(self, m=m)

    def describe(self):
        out = {"family": self.name, "m": self.m, "delta": self.delta}
        if self.name == "theoretical":
            out["epsilon"] = self.epsilon
        return out
