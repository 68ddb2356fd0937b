"""RBF base kernels, bandwidth grids and the weighted multi-kernel combiner.

All kernels use the convention ``k(x, y) = exp(-||x - y||^2 / h)``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist, squareform

from steinflow.errors import InputError

WEIGHT_NORM_TOL = 1e-9


def _as_point(x, name):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise InputError(f"{name} must be a vector, got shape {x.shape}")
    return x


def _check_bandwidth(h):
    h = float(h)
    if not h > 0 or not np.isfinite(h):
        raise InputError(f"bandwidth must be positive and finite, got {h}")
    return h


def rbf_eval(x, y, h):
    """Value, gradient in the first argument and mixed-Hessian trace of the RBF kernel.

    Returns ``(k, grad_x k, Tr grad_x grad_y k)`` for ``k = exp(-||x-y||^2 / h)``.
    """
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    h = _check_bandwidth(h)
    diff = x - y
    r2 = float(diff @ diff)
    value = np.exp(-r2 / h)
    grad_x = -(2.0 / h) * diff * value
    trace_hess = value * (2.0 * x.size / h - 4.0 * r2 / h**2)
    return value, grad_x, trace_hess


@dataclass(frozen=True)
class BandwidthGrid:
    bandwidths: tuple

    def __post_init__(self):
        bw = tuple(float(h) for h in np.atleast_1d(self.bandwidths))
        if not bw:
            raise InputError("bandwidth grid is empty")
        if any(not (h > 0 and np.isfinite(h)) for h in bw):
            raise InputError(f"bandwidths must be positive and finite: {bw}")
        if any(b <= a for a, b in zip(bw, bw[1:])):
            raise InputError(f"bandwidths must be strictly increasing: {bw}")
        object.__setattr__(self, "bandwidths", bw)

    def __len__(self):
        return len(self.bandwidths)

    def __iter__(self):
        return iter(self.bandwidths)

    def as_array(self):
        return np.array(self.bandwidths)


def build_grid(lo, count, factor=2.0):
    """Geometric bandwidth grid ``[lo, lo*factor, ..., lo*factor**(count-1)]``.

    ``factor < 1`` is accepted and the grid is returned in increasing order.
    """
    lo = _check_bandwidth(lo)
    count = int(count)
    if count < 1:
        raise InputError(f"grid needs at least one bandwidth, got count={count}")
    factor = float(factor)
    if not factor > 0 or not np.isfinite(factor):
        raise InputError(f"grid factor must be positive, got {factor}")
    if count > 1 and factor == 1.0:
        raise InputError("grid factor 1 repeats the same bandwidth")
    values = lo * factor ** np.arange(count, dtype=float)
    if factor < 1:
        values = values[::-1]
    return BandwidthGrid(tuple(values))


def median_heuristic(particles):
    """Bandwidth ``med^2 / log n`` from the median pairwise distance.

    Falls back to ``h = 1`` when all particles coincide (``med = 0``).
    """
    x = as_particles(particles)
    n = x.shape[0]
    if n < 2:
        raise InputError("median heuristic needs at least two particles")
    med = np.median(pdist(x))
    if med <= 0:
        return 1.0
    return float(med**2 / np.log(n))


def as_particles(particles):
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InputError(f"particles must be an (n, d) array, got shape {x.shape}")
    if x.shape[0] == 0:
        raise InputError("particle set is empty")
    return x


@dataclass(frozen=True, eq=False)
class PairwiseKernelEval:
    """Per-kernel pairwise quantities over one particle set.

    ``values[i]`` is the Gram matrix of kernel ``i``. Gradients
    ``grad_first_arg[i, j, l] = d/dx_j k_i(x_j, x_l)`` and mixed-Hessian traces
    are derived lazily from the shared squared-distance matrix.
    """

    positions: np.ndarray
    bandwidths: np.ndarray
    sqdist: np.ndarray
    values: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]

    @property
    def m(self):
        return self.bandwidths.size

    @cached_property
    def differences(self):
        # differences[j, l] = x_j - x_l
        x = self.positions
        return x[:, None, :] - x[None, :, :]

    @cached_property
    def grad_first_arg(self):
        coef = -2.0 / self.bandwidths[:, None, None] * self.values
        return coef[..., None] * self.differences[None]

    @cached_property
    def trace_mixed_hessian(self):
        h = self.bandwidths[:, None, None]
        return self.values * (2.0 * self.d / h - 4.0 * self.sqdist[None] / h**2)

    def kernel(self, i):
        """Single-kernel view sharing this evaluation's distance matrix."""
        return PairwiseKernelEval(
            self.positions, self.bandwidths[i : i + 1], self.sqdist, self.values[i : i + 1]
        )


def pairwise_sqdist(x):
    if x.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(x, "sqeuclidean"))


def build_pairwise_eval(particles, grid):
    """Evaluate every base kernel on all particle pairs with one distance pass."""
    x = as_particles(particles)
    if not isinstance(grid, BandwidthGrid):
        grid = BandwidthGrid(tuple(np.atleast_1d(grid)))
    h = grid.as_array()
    sqdist = pairwise_sqdist(x)
    values = np.exp(-sqdist[None] / h[:, None, None])
    return PairwiseKernelEval(x, h, sqdist, values)


def check_weights(w, m=None, tol=WEIGHT_NORM_TOL):
    """Validate a kernel weight vector: nonnegative with unit Euclidean norm."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.ndim != 1:
        raise InputError(f"weights must be a vector, got shape {w.shape}")
    if m is not None and w.size != m:
        raise InputError(f"expected {m} kernel weights, got {w.size}")
    if np.any(w < 0):
        raise InputError(f"kernel weights must be nonnegative: {w}")
    if abs(np.linalg.norm(w) - 1.0) > tol:
        raise InputError(f"kernel weights must have unit norm, got {np.linalg.norm(w)}")
    return w


def uniform_weights(m):
    return np.full(m, 1.0 / np.sqrt(m))


def normalize_weights(w):
    """Project onto the nonnegative unit sphere; all-zero input maps to uniform."""
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    norm = np.linalg.norm(w)
    if norm == 0 or not np.isfinite(norm):
        return uniform_weights(w.size)
    return w / norm


def combine(w, arrays):
    # explicit left-to-right accumulation keeps the sum order fixed
    out = w[0] * arrays[0]
    for wi, a in zip(w[1:], arrays[1:]):
        out = out + wi * a
    return out


def multi_kernel_eval(kernel_eval, w, check_norm=True):
    """Weighted combination ``(sum w_i K_i, sum w_i G_i, sum w_i T_i)``.

    ``check_norm=False`` skips the unit-norm check so unnormalized
    combinations (linearity checks) can be formed.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.ndim != 1 or w.size != kernel_eval.m:
        raise InputError(f"expected {kernel_eval.m} kernel weights, got shape {w.shape}")
    if check_norm:
        check_weights(w)
    return (
        combine(w, kernel_eval.values),
        combine(w, kernel_eval.grad_first_arg),
        combine(w, kernel_eval.trace_mixed_hessian),
    )
