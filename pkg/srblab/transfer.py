"""Transfer (Perron-Frobenius) operators: exact pointwise sums and Ulam matrices."""
from dataclasses import dataclass
import logging
import math
import struct
import typing as tp

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import kernels, rng
from .utils import atomic_path
from .maps import ROOT_TOL, fiber_deriv, fiber_preimages, preimage_arrays

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
DENSE_ROUTINE = 256
DENSE_LIMIT = 4096
NEAR_CRITICAL_ITER = 100_000
RESTARTS = 10

ULAM_MAGIC = b"ULAM"
ULAM_VERSION = 1
ULAM_HEADER = struct.Struct("<4sIIIQQ")
ULAM_ENTRY = np.dtype([("row", "<u4"), ("col", "<u4"), ("value", "<f8")])


@dataclass(frozen=True, eq=False)
class UlamOperator:
    """Column-stochastic Ulam matrix.

    Cell j of an (nx, ny) grid holds x in [i/nx, (i+1)/nx), y in [k/ny, (k+1)/ny) with
    j = i * ny + k. A 1D operator has shape (n,).

    Args:
        matrix: sparse (csc) matrix, column j is the image of the uniform density on cell j.
        shape: grid shape.
        samples: sample points per cell actually used (0 for exact preimage columns).
        seed: seed of the sampler.
        method: "sampling" or "preimage".
    """
    matrix: sparse.csc_matrix
    shape: tp.Tuple[int, ...]
    samples: int
    seed: int
    method: str = "sampling"

    def __post_init__(self):
        cells = int(np.prod(self.shape))
        if self.matrix.shape != (cells, cells):
            raise ValueError(f"Matrix {self.matrix.shape} does not match grid {self.shape}")
        data = self.matrix.data
        if data.size and (data.min() < 0 or data.max() > 1 + STOCHASTIC_TOL):
            raise ValueError("Ulam entries must lie in [0, 1]")
        error = self.column_error()
        if error > STOCHASTIC_TOL:
            raise ValueError(f"Ulam matrix is not column stochastic, error {error:.3g}")

    @property
    def cells(self):
        return self.matrix.shape[0]

    def column_error(self):
        sums = np.asarray(self.matrix.sum(axis=0)).ravel()
        return float(np.abs(sums - 1).max())


@dataclass(frozen=True, eq=False)
class SpectralReport:
    leading: float
    subleading_modulus: float
    stationary: np.ndarray
    iterations: int
    residual: float
    converged: bool = True
    slow_mixing: bool = False


def pf_apply_exact(system, u, p, tol=ROOT_TOL):
    """Sum of u(q) / |det DF(q)| over the 2m preimages q of p.

    `u` takes arrays of x and y.
    """
    return float(pf_apply_grid(system, u, p.x, p.y, tol)[0])


def pf_apply_grid(system, u, x, y, tol=ROOT_TOL):
    qx, qy = preimage_arrays(system, x, y, tol)
    dets = system.m * np.abs(fiber_deriv(system.fiber, qy.ravel())).reshape(qy.shape)
    values = np.asarray(u(qx, qy), dtype=np.float64) * np.ones_like(qx)
    return (values / dets).sum(axis=1)


def pf_apply_fiber(f, u, y, tol=ROOT_TOL):
    """1D transfer operator of a fiber map at the points y."""
    roots = fiber_preimages(f, y, tol)
    slopes = np.abs(fiber_deriv(f, roots.ravel())).reshape(roots.shape)
    values = np.asarray(u(roots), dtype=np.float64) * np.ones_like(roots)
    out = (values / slopes).sum(axis=1)
    return out if np.ndim(y) else float(out[0])


def _from_targets(targets, cells):
    ncols, count = targets.shape
    rows = targets.ravel()
    cols = np.repeat(np.arange(ncols), count)
    matrix = sparse.csc_matrix((np.ones(rows.size), (rows, cols)), shape=(cells, cells))
    matrix.sum_duplicates()
    matrix.data /= count
    return matrix


def ulam_1d(f, n=4096, samples_per_cell=64, seed=2036, method="sampling"):
    """Ulam matrix of a fiber map on n cells of the circle.

    With method="sampling" every cell is split into an even number of strata, one
    jittered point per stratum. method="preimage" splits cells at the preimages of the
    cell boundaries instead and is exact up to root finding.
    """
    if n < 2:
        raise ValueError(f"Need at least 2 cells, got {n}")
    if method == "preimage":
        rows, vals = kernels.ulam_preimage_columns(f.params, int(n), 1e-15)
        keep = rows >= 0
        cols = np.repeat(np.arange(n), rows.shape[1]).reshape(rows.shape)
        matrix = sparse.csc_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
        matrix.sum_duplicates()
        return UlamOperator(matrix, (n,), 0, 0, method)
    if method != "sampling":
        raise ValueError(f"Unknown Ulam method {method!r}")
    if samples_per_cell < 32:
        raise ValueError(f"Need at least 32 samples per cell, got {samples_per_cell}")
    strata = samples_per_cell + samples_per_cell % 2
    seed = int(seed) & rng.MASK
    targets = kernels.ulam_targets_1d(f.params, int(n), strata, np.uint64(seed))
    logger.debug("1D Ulam: %d cells, %d strata per cell", n, strata)
    return UlamOperator(_from_targets(targets, n), (n,), strata, seed)


def strata_2d(m, samples_per_cell):
    """(sx, sy): sx a multiple of m, sy even, sx * sy close to `samples_per_cell`."""
    sx = m * max(1, round(math.sqrt(samples_per_cell) / m))
    sy = max(2, 2 * round(samples_per_cell / sx / 2))
    return sx, sy


def ulam_2d(system, nx=256, ny=256, samples_per_cell=64, seed=2036):
    if samples_per_cell < 16:
        raise ValueError(f"Need at least 16 samples per cell, got {samples_per_cell}")
    if nx < 2 or ny < 2:
        raise ValueError(f"Need at least 2x2 cells, got {nx}x{ny}")
    sx, sy = strata_2d(system.m, samples_per_cell)
    seed = int(seed) & rng.MASK
    targets = kernels.ulam_targets_2d(*system.kernel_args, int(nx), int(ny), sx, sy,
                                      np.uint64(seed))
    logger.debug("2D Ulam: %dx%d cells, %dx%d strata per cell", nx, ny, sx, sy)
    return UlamOperator(_from_targets(targets, nx * ny), (nx, ny), sx * sy, seed)


def _deflated(op, stationary):
    matrix = op.matrix

    def matvec(x):
        x = np.ravel(x)
        return matrix @ x - stationary * x.sum()
    return splinalg.LinearOperator(matrix.shape, matvec=matvec, dtype=np.float64)


def _power_modulus(deflated, cells, seed, iters=500):
    """Largest growth rate of the deflated operator over RESTARTS random starts."""
    best = 0.
    for restart in range(RESTARTS):
        x = rng.uniform_array(seed, cells, key=restart) - 0.5
        x /= np.linalg.norm(x)
        log_growth = 0.
        estimate = 0.
        for step in range(1, iters + 1):
            y = deflated.matvec(x)
            norm = np.linalg.norm(y)
            if norm == 0:
                estimate = 0.
                break
            log_growth += math.log(norm)
            x = y / norm
            previous, estimate = estimate, math.exp(log_growth / step)
            if step > 20 and abs(estimate - previous) < 1e-10:
                break
        best = max(best, estimate)
    return best


def subleading_modulus(op, stationary):
    """Second largest eigenvalue modulus of the Ulam matrix."""
    if op.cells <= DENSE_ROUTINE:
        return float(dense_spectrum(op)[1]) if op.cells > 1 else 0.
    deflated = _deflated(op, stationary)
    try:
        values = splinalg.eigs(deflated, k=1, which="LM", tol=1e-8, maxiter=5000,
                               v0=rng.uniform_array(op.seed, op.cells) - 0.5,
                               return_eigenvectors=False)
        return float(np.abs(values).max())
    except splinalg.ArpackNoConvergence:
        logger.warning("ARPACK did not converge on %d cells, using power iteration", op.cells)
        return _power_modulus(deflated, op.cells, op.seed)


def stationary_density(op, tol=1e-12, max_iter=10_000, near_critical=False, spectrum=True):
    """Power iteration from the uniform vector.

    :param near_critical: raise the iteration cap and report slow mixing instead of
        non convergence.
    :param spectrum: also estimate the subleading eigenvalue modulus.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if near_critical:
        max_iter = max(max_iter, NEAR_CRITICAL_ITER)
    matrix = op.matrix
    x = np.full(op.cells, 1. / op.cells)
    residual = math.inf
    iterations = 0
    while iterations < max_iter:
        y = matrix @ x
        iterations += 1
        residual = float(np.abs(y - x).max())
        x = y / y.sum()
        if residual <= tol:
            break
    converged = residual <= tol
    slow = near_critical and not converged
    if not converged:
        logger.warning("Stationary iteration stopped after %d steps, residual %.3g",
                       iterations, residual)
    np.clip(x, 0, None, out=x)
    x /= x.sum()
    y = matrix @ x
    leading = float(x @ y / (x @ x))
    residual = float(np.abs(y - x).max())
    sub = subleading_modulus(op, x) if spectrum else math.nan
    return SpectralReport(leading, sub, x, iterations, residual, converged, slow)


def dense_spectrum(op):
    """All eigenvalue moduli, decreasing. Only for small operators."""
    if op.cells > DENSE_LIMIT:
        raise ValueError(f"Dense spectrum limited to {DENSE_LIMIT} cells, got {op.cells}")
    values = np.linalg.eigvals(op.matrix.toarray())
    return np.sort(np.abs(values))[::-1]


def cell_centers(shape):
    if len(shape) == 1:
        return ((np.arange(shape[0]) + 0.5) / shape[0],)
    nx, ny = shape
    x = (np.arange(nx) + 0.5) / nx
    y = (np.arange(ny) + 0.5) / ny
    gx, gy = np.meshgrid(x, y, indexing="ij")
    return gx.ravel(), gy.ravel()


def integrate_observable(stationary, psi, shape):
    """Sum of stationary_j psi(center_j). 1D grids pass one coordinate to psi."""
    values = np.asarray(psi(*cell_centers(shape)), dtype=np.float64)
    values = values * np.ones(len(stationary))
    return math.fsum(np.asarray(stationary) * values)


def density_raster(op, stationary):
    """Stationary vector as a density against Lebesgue measure, in grid shape."""
    return np.asarray(stationary).reshape(op.shape) * op.cells


def save_operator(op, path):
    """Binary dump: header then (row u32, col u32, value f64) triples. ny = 0 marks 1D."""
    coo = op.matrix.tocoo()
    nx, ny = (op.shape[0], 0) if len(op.shape) == 1 else op.shape
    entries = np.empty(coo.nnz, dtype=ULAM_ENTRY)
    entries["row"] = coo.row
    entries["col"] = coo.col
    entries["value"] = coo.data
    with atomic_path(path) as tmp, open(tmp, "wb") as fp:
        fp.write(ULAM_HEADER.pack(ULAM_MAGIC, ULAM_VERSION, nx, ny, coo.nnz, op.seed))
        fp.write(entries.tobytes())


def load_operator(path):
    with open(path, "rb") as fp:
        header = fp.read(ULAM_HEADER.size)
        payload = fp.read()
    if len(header) < ULAM_HEADER.size:
        raise ValueError(f"{path}: truncated ULAM header")
    magic, version, nx, ny, nnz, seed = ULAM_HEADER.unpack(header)
    if magic != ULAM_MAGIC or version != ULAM_VERSION:
        raise ValueError(f"{path}: not a ULAM v{ULAM_VERSION} file")
    entries = np.frombuffer(payload, dtype=ULAM_ENTRY, count=nnz)
    shape = (nx,) if ny == 0 else (nx, ny)
    cells = nx if ny == 0 else nx * ny
    matrix = sparse.csc_matrix(
        (entries["value"].astype(np.float64),
         (entries["row"].astype(np.int64), entries["col"].astype(np.int64))),
        shape=(cells, cells))
    return UlamOperator(matrix, shape, 0, seed, "loaded")
