"""Compiled scalar kernels.

Every hot loop of the lab (orbits, Ulam sampling, preimage bisection, certificates,
transversality counts) runs here. Python-facing modules pack a fiber map into a
``params`` tuple ``(kind, epsilon, offset, table, slopes, shape)``:

* ``kind``: one of DOUBLING, INTERMITTENT, EXPERIMENTAL,
* ``epsilon``: window width of the intermittent bump (unused otherwise),
* ``offset``: additive constant of the lift (a*epsilon or a),
* ``table``/``slopes``: phi and phi' at 2**16 + 1 uniform nodes of [0, 1],
* ``shape``: smooth-step parameters of phi' (see ``srblab.bump``).
"""
import math

import numpy as np
from numba import njit, prange, types

DOUBLING = 0
INTERMITTENT = 1
EXPERIMENTAL = 2

TWO_PI = 2.0 * math.pi
RISE_START = 0.1

# shape vector layout
H, L, A1, W1, A2, W2, A3, W3, SCALE = range(9)

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SPLITMIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SPLITMIX_M2 = np.uint64(0x94D049BB133111EB)
_XORSHIFT_M = np.uint64(0x2545F4914F6CDD1D)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(types.uint64(types.uint64), cache=True, fastmath=False)
def splitmix64(z):
    z = z + _SPLITMIX_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _SPLITMIX_M1
    z = (z ^ (z >> np.uint64(27))) * _SPLITMIX_M2
    return z ^ (z >> np.uint64(31))


@njit(types.UniTuple(types.uint64, 2)(types.uint64), cache=True, fastmath=False)
def xorshift64star(state):
    """One step of xorshift64*. Returns (new_state, output)."""
    state ^= state >> np.uint64(12)
    state ^= state << np.uint64(25)
    state ^= state >> np.uint64(27)
    return state, state * _XORSHIFT_M


@njit(types.float64(types.uint64), cache=True, fastmath=False)
def to_unit(word):
    return float(word >> np.uint64(11)) * _INV_2_53


@njit(types.uint64(types.uint64, types.uint64), cache=True, fastmath=False)
def stream_state(seed, key):
    state = splitmix64(seed ^ splitmix64(key))
    if state == np.uint64(0):
        state = _SPLITMIX_GAMMA
    return state


@njit(types.float64[:](types.uint64, types.uint64, types.int64), cache=True, fastmath=False)
def uniform_array(seed, key, n):
    out = np.empty(n)
    state = stream_state(seed, key)
    for k in range(n):
        state, word = xorshift64star(state)
        out[k] = to_unit(word)
    return out


@njit(cache=True, fastmath=False)
def wrap(v):
    r = v - math.floor(v)
    if r >= 1.0:
        r = 0.0
    return r


# Smooth step psi(t) = e(t) / (e(t) + e(1 - t)), e(t) = exp(-1/t).

@njit(cache=True, fastmath=False)
def smooth_step(t):
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(1.0 / t - 1.0 / (1.0 - t)))


@njit(cache=True, fastmath=False)
def smooth_step_slope(t):
    if t <= 0.0 or t >= 1.0:
        return 0.0
    s = smooth_step(t)
    return s * (1.0 - s) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)))


@njit(cache=True, fastmath=False)
def smooth_step_curvature(t):
    if t <= 0.0 or t >= 1.0:
        return 0.0
    s = smooth_step(t)
    q = 1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))
    dq = -2.0 / (t * t * t) + 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t))
    ds = s * (1.0 - s) * q
    return ds * (1.0 - 2.0 * s) * q + s * (1.0 - s) * dq


# phi and its derivatives

@njit(cache=True, fastmath=False)
def profile_slope(u, shape):
    if u <= RISE_START or u >= 1.0:
        return 0.0
    rise = shape[H] * smooth_step((u - shape[A1]) / shape[W1])
    turn = (shape[H] + shape[L]) * smooth_step((u - shape[A2]) / shape[W2])
    back = shape[L] * smooth_step((u - shape[A3]) / shape[W3])
    return shape[SCALE] * (rise - turn + back)


@njit(cache=True, fastmath=False)
def profile_curvature(u, shape):
    if u <= RISE_START or u >= 1.0:
        return 0.0
    rise = shape[H] * smooth_step_slope((u - shape[A1]) / shape[W1]) / shape[W1]
    turn = (shape[H] + shape[L]) * smooth_step_slope((u - shape[A2]) / shape[W2]) / shape[W2]
    back = shape[L] * smooth_step_slope((u - shape[A3]) / shape[W3]) / shape[W3]
    return shape[SCALE] * (rise - turn + back)


@njit(cache=True, fastmath=False)
def profile_value(u, table, slopes):
    """Cubic Hermite interpolation of phi between the tabulated nodes."""
    if u <= RISE_START or u >= 1.0:
        return 0.0
    n = table.shape[0] - 1
    pos = u * n
    idx = int(pos)
    if idx >= n:
        idx = n - 1
    t = pos - idx
    h = 1.0 / n
    t2 = t * t
    t3 = t2 * t
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + t
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return (h00 * table[idx] + h10 * h * slopes[idx]
            + h01 * table[idx + 1] + h11 * h * slopes[idx + 1])


@njit(cache=True, fastmath=False)
def profile_value_array(us, table, slopes):
    out = np.empty(us.shape[0])
    for k in range(us.shape[0]):
        out[k] = profile_value(us[k], table, slopes)
    return out


@njit(cache=True, fastmath=False)
def profile_slope_array(us, shape):
    out = np.empty(us.shape[0])
    for k in range(us.shape[0]):
        out[k] = profile_slope(us[k], shape)
    return out


@njit(cache=True, fastmath=False)
def profile_curvature_array(us, shape):
    out = np.empty(us.shape[0])
    for k in range(us.shape[0]):
        out[k] = profile_curvature(us[k], shape)
    return out


# Fiber maps, evaluated through their lift: f(y + 1) = f(y) + 2.

@njit(cache=True, fastmath=False)
def lift(params, y):
    kind, eps, offset, table, slopes, shape = params
    fl = math.floor(y)
    r = y - fl
    if kind == INTERMITTENT:
        v = 2.0 * r - eps * profile_value(r / eps, table, slopes)
    elif kind == EXPERIMENTAL:
        v = 2.0 * r - (math.sin(TWO_PI * r) + math.cos(TWO_PI * r) - 1.0) / TWO_PI
    else:
        v = 2.0 * r
    return v + offset + 2.0 * fl


@njit(cache=True, fastmath=False)
def slope(params, y):
    kind, eps, offset, table, slopes, shape = params
    r = y - math.floor(y)
    if kind == INTERMITTENT:
        return 2.0 - profile_slope(r / eps, shape)
    elif kind == EXPERIMENTAL:
        return 2.0 - math.cos(TWO_PI * r) + math.sin(TWO_PI * r)
    return 2.0


@njit(cache=True, fastmath=False)
def curvature(params, y):
    kind, eps, offset, table, slopes, shape = params
    r = y - math.floor(y)
    if kind == INTERMITTENT:
        return -profile_curvature(r / eps, shape) / eps
    elif kind == EXPERIMENTAL:
        return TWO_PI * (math.sin(TWO_PI * r) + math.cos(TWO_PI * r))
    return 0.0


@njit(cache=True, fastmath=False)
def lift_array(params, ys):
    out = np.empty(ys.shape[0])
    for k in range(ys.shape[0]):
        out[k] = lift(params, ys[k])
    return out


@njit(cache=True, fastmath=False)
def slope_array(params, ys):
    out = np.empty(ys.shape[0])
    for k in range(ys.shape[0]):
        out[k] = slope(params, ys[k])
    return out


@njit(cache=True, fastmath=False)
def curvature_array(params, ys):
    out = np.empty(ys.shape[0])
    for k in range(ys.shape[0]):
        out[k] = curvature(params, ys[k])
    return out


@njit(cache=True, fastmath=False)
def iterate_slope_array(params, ys, n):
    """(f^n)'(y) for every y."""
    out = np.empty(ys.shape[0])
    for k in range(ys.shape[0]):
        y = ys[k]
        d = 1.0
        for _ in range(n):
            d *= slope(params, y)
            y = wrap(lift(params, y))
        out[k] = d
    return out


# Skew product F(x, y) = (m x, f(y) + coupling cos(2 pi x) + shift)

@njit(cache=True, fastmath=False)
def skew_step(params, m, coupling, shift, x, y):
    ny = wrap(lift(params, y) + coupling * math.cos(TWO_PI * x) + shift)
    return wrap(m * x), ny


@njit(cache=True, fastmath=False)
def skew_step_array(params, m, coupling, shift, xs, ys):
    ox = np.empty(xs.shape[0])
    oy = np.empty(xs.shape[0])
    for k in range(xs.shape[0]):
        ox[k], oy[k] = skew_step(params, m, coupling, shift, xs[k], ys[k])
    return ox, oy


@njit(cache=True, fastmath=False)
def orbit_chunk(params, m, coupling, shift, x, y, n):
    xs = np.empty(n)
    ys = np.empty(n)
    for k in range(n):
        xs[k] = x
        ys[k] = y
        x, y = skew_step(params, m, coupling, shift, x, y)
    return xs, ys, x, y


@njit(cache=True, fastmath=False)
def advance(params, m, coupling, shift, x, y, n):
    for _ in range(n):
        x, y = skew_step(params, m, coupling, shift, x, y)
    return x, y


@njit(cache=True, fastmath=False)
def orbit_log_slope(params, m, coupling, shift, x, y, length):
    """Compensated sum of log f'(y_k) over ``length`` points starting at (x, y)."""
    total = 0.0
    comp = 0.0
    for _ in range(length):
        term = math.log(slope(params, y)) - comp
        acc = total + term
        comp = (acc - total) - term
        total = acc
        x, y = skew_step(params, m, coupling, shift, x, y)
    return total, x, y


@njit(cache=True, fastmath=False)
def orbit_histogram(params, m, coupling, shift, x, y, length, nx, ny):
    counts = np.zeros((nx, ny), dtype=np.int64)
    for _ in range(length):
        i = min(int(x * nx), nx - 1)
        j = min(int(y * ny), ny - 1)
        counts[i, j] += 1
        x, y = skew_step(params, m, coupling, shift, x, y)
    return counts, x, y


# Preimages

@njit(cache=True, fastmath=False)
def bisect_lift(params, target, lo, hi, tol):
    """Solve lift(z) = target on [lo, hi]. Status 0 on success, 1 if not bracketed."""
    if not (lift(params, lo) <= target <= lift(params, hi)):
        return 0.5 * (lo + hi), 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lift(params, mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), 0


@njit(cache=True, fastmath=False)
def fiber_preimage_pair(params, ystar, target, tol):
    """The two solutions of f(z) = target mod 1, one per monotone branch."""
    base = lift(params, 0.0)
    t1 = base + wrap(target - base)
    z1, s1 = bisect_lift(params, t1, 0.0, ystar, tol)
    z2, s2 = bisect_lift(params, t1 + 1.0, ystar, 1.0, tol)
    return wrap(z1), wrap(z2), s1 + s2


@njit(cache=True, fastmath=False)
def fiber_preimage_array(params, ystar, targets, tol):
    out = np.empty((targets.shape[0], 2))
    status = 0
    for k in range(targets.shape[0]):
        z1, z2, s = fiber_preimage_pair(params, ystar, targets[k], tol)
        out[k, 0] = z1
        out[k, 1] = z2
        status += s
    return out, status


@njit(parallel=True, cache=True, fastmath=False)
def skew_preimage_array(params, ystar, m, coupling, shift, xs, ys, tol):
    """Preimages of every (xs[k], ys[k]); column 2*j + b is base branch j, fiber branch b."""
    npts = xs.shape[0]
    qx = np.empty((npts, 2 * m))
    qy = np.empty((npts, 2 * m))
    bad = np.zeros(npts, dtype=np.int64)
    for k in prange(npts):
        for j in range(m):
            bx = (xs[k] + j) / m
            target = ys[k] - coupling * math.cos(TWO_PI * bx) - shift
            z1, z2, s = fiber_preimage_pair(params, ystar, target, tol)
            qx[k, 2 * j] = bx
            qx[k, 2 * j + 1] = bx
            qy[k, 2 * j] = z1
            qy[k, 2 * j + 1] = z2
            bad[k] += s
    return qx, qy, bad.sum()


# Ulam sampling

@njit(parallel=True, cache=True, fastmath=False)
def ulam_targets_1d(params, n, strata, seed):
    targets = np.empty((n, strata), dtype=np.int64)
    for col in prange(n):
        state = stream_state(seed, np.uint64(col))
        for b in range(strata):
            state, word = xorshift64star(state)
            y = (col + (b + to_unit(word)) / strata) / n
            z = wrap(lift(params, y))
            targets[col, b] = min(int(z * n), n - 1)
    return targets


@njit(parallel=True, cache=True, fastmath=False)
def ulam_targets_2d(params, m, coupling, shift, nx, ny, sx, sy, seed):
    ncells = nx * ny
    targets = np.empty((ncells, sx * sy), dtype=np.int64)
    for col in prange(ncells):
        i = col // ny
        j = col % ny
        state = stream_state(seed, np.uint64(col))
        for a in range(sx):
            for b in range(sy):
                state, wx = xorshift64star(state)
                state, wy = xorshift64star(state)
                x = (i + (a + to_unit(wx)) / sx) / nx
                y = (j + (b + to_unit(wy)) / sy) / ny
                x1, y1 = skew_step(params, m, coupling, shift, x, y)
                ti = min(int(x1 * nx), nx - 1)
                tj = min(int(y1 * ny), ny - 1)
                targets[col, a * sy + b] = ti * ny + tj
    return targets


@njit(cache=True, fastmath=False)
def ulam_preimage_columns(params, n, tol):
    """Exact 1D Ulam columns: split each cell at preimages of the cell boundaries."""
    width = 8
    rows = np.full((n, width), -1, dtype=np.int64)
    vals = np.zeros((n, width))
    for col in range(n):
        a = col / n
        b = (col + 1) / n
        la = lift(params, a)
        lb = lift(params, b)
        first = int(math.floor(la * n))
        last = int(math.ceil(lb * n))
        start = a
        piece = 0
        for k in range(first + 1, last):
            z, status = bisect_lift(params, k / n, a, b, tol)
            if status != 0:
                continue
            rows[col, piece] = (first + piece) % n
            vals[col, piece] = (z - start) * n
            start = z
            piece += 1
            if piece >= width - 1:
                break
        rows[col, piece] = (first + piece) % n
        vals[col, piece] = (b - start) * n
    return rows, vals


# Expansion certificate

@njit(cache=True, fastmath=False)
def curvature_bound(bins, gmax, z, w):
    nb = bins.shape[0]
    lo = int(math.floor((z - w) * nb))
    hi = int(math.floor((z + w) * nb))
    if hi - lo + 1 >= nb:
        return gmax
    best = 0.0
    for k in range(lo, hi + 1):
        v = bins[k % nb]
        if v > best:
            best = v
    return best


@njit(parallel=True, cache=True, fastmath=False)
def expansion_certificate(params, bins, gmax, grid_n, n_max):
    """Least n with a padded lower bound of (f^n)' above 1, per grid cell (0 if none)."""
    found = np.zeros(grid_n, dtype=np.int64)
    lower = np.empty(grid_n)
    for idx in prange(grid_n):
        z = (idx + 0.5) / grid_n
        w = 0.5 / grid_n
        logd = 0.0
        for n in range(1, n_max + 1):
            d = slope(params, z)
            k = curvature_bound(bins, gmax, z, w)
            lo = d - k * w
            if lo <= 0.0 or w >= 0.5:
                break
            logd += math.log(lo)
            w *= d + k * w
            z = wrap(lift(params, z))
            if logd > 0.0:
                found[idx] = n
                break
        lower[idx] = logd
    return found, lower


# Cone transversality counts

@njit(parallel=True, cache=True, fastmath=False)
def cone_counts(centers, halves, guard):
    """Per grid point: max over q of transversal and of overlapping image cones."""
    npts, nq = centers.shape
    trans = np.zeros(npts, dtype=np.int64)
    overlap = np.zeros(npts, dtype=np.int64)
    for k in prange(npts):
        best_t = 0
        best_o = 0
        for i in range(nq):
            lo_i = centers[k, i] - halves[k, i]
            hi_i = centers[k, i] + halves[k, i]
            t = 0
            for j in range(nq):
                lo_j = centers[k, j] - halves[k, j]
                hi_j = centers[k, j] + halves[k, j]
                if hi_i + guard < lo_j or hi_j + guard < lo_i:
                    t += 1
            if t > best_t:
                best_t = t
            if nq - t > best_o:
                best_o = nq - t
        trans[k] = best_t
        overlap[k] = best_o
    return trans, overlap
