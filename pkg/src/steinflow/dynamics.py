"""SVGD and multi-kernel SVGD particle updates.

The multi-kernel direction is the weighted sum of the per-kernel SVGD
directions; after each move the weights are recomputed from the per-kernel
discrepancies of the current particles.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from steinflow.data import minibatch_stream
from steinflow.discrepancy import ARGMAX_RULE, V_STATISTIC, is_degenerate, ksd_per_kernel, mksd, optimal_weights
from steinflow.errors import InputError, NumericalError
from steinflow.kernel import (
    BandwidthGrid,
    as_particles,
    build_pairwise_eval,
    check_weights,
    combine,
    median_heuristic,
    normalize_weights,
    uniform_weights,
)

log = logging.getLogger(__name__)

CLOSED_FORM = "closed_form"
EXACT_ARGMAX = "exact_argmax"
ADAGRAD_ASCENT = "adagrad_ascent"
WEIGHT_MODES = (CLOSED_FORM, EXACT_ARGMAX, ADAGRAD_ASCENT)


def _check_scores(kernel_eval, scores):
    s = np.asarray(scores, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape != kernel_eval.positions.shape:
        raise InputError(f"scores {s.shape} do not match particles {kernel_eval.positions.shape}")
    return s


def per_kernel_directions(kernel_eval, scores):
    """SVGD direction for every base kernel, shape ``(m, n, d)``.

    Row ``l`` of kernel ``i`` is
    ``(1/n) sum_j [k_i(x_j, x_l) s_j + grad_{x_j} k_i(x_j, x_l)]``.
    """
    s = _check_scores(kernel_eval, scores)
    x = kernel_eval.positions
    n, d = x.shape
    k = kernel_eval.values
    h = kernel_eval.bandwidths[:, None, None]
    # K is symmetric, so K^T v == K v
    ks_kx = k @ np.hstack([s, x])
    colsum = k.sum(axis=1)
    repulsive = (2.0 / h) * (colsum[:, :, None] * x[None] - ks_kx[:, :, d:])
    return (ks_kx[:, :, :d] + repulsive) / n


def svgd_direction(kernel_eval, scores):
    """Vanilla SVGD direction for a single-kernel evaluation."""
    if kernel_eval.m != 1:
        raise InputError(f"expected a single-kernel evaluation, got {kernel_eval.m} kernels")
    return per_kernel_directions(kernel_eval, scores)[0]


def mk_svgd_direction(kernel_eval, scores, w):
    """Multi-kernel direction ``sum_i w_i phi_i``."""
    w = check_weights(w, kernel_eval.m)
    return combine(w, per_kernel_directions(kernel_eval, scores))


@dataclass(frozen=True)
class AdaGradState:
    accum: np.ndarray
    step: float
    fudge: float = 1e-6

    @classmethod
    def zeros(cls, shape, step, fudge=1e-6):
        if not step > 0:
            raise InputError(f"step size must be positive, got {step}")
        return cls(np.zeros(shape), float(step), float(fudge))


def adagrad_step(state, grad):
    """Return ``(delta, new_state)`` for an ascent step along ``grad``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.accum.shape:
        raise InputError(f"gradient {grad.shape} does not match state {state.accum.shape}")
    accum = state.accum + grad**2
    delta = state.step * grad / (state.fudge + np.sqrt(accum))
    return delta, AdaGradState(accum, state.step, state.fudge)


@dataclass
class IterationRecord:
    iteration: int
    weights: np.ndarray
    ksd: np.ndarray
    mksd: float
    elapsed: float
    degenerate: bool = False
    metrics: dict = field(default_factory=dict)


@dataclass
class RunTrace:
    """Append-only per-iteration log of a run."""

    kernel_labels: list
    records: list = field(default_factory=list)
    positions: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def append(self, record):
        self.records.append(record)

    @property
    def weights(self):
        return np.array([r.weights for r in self.records])

    @property
    def ksd(self):
        return np.array([r.ksd for r in self.records])

    @property
    def mksd(self):
        return np.array([r.mksd for r in self.records])

    def metric_names(self):
        names = []
        for r in self.records:
            names.extend(k for k in r.metrics if k not in names)
        return names


def _check_finite(arr, what, iteration):
    if not np.all(np.isfinite(arr)):
        row, col = np.argwhere(~np.isfinite(arr))[0]
        raise NumericalError(f"non-finite {what} at iteration {iteration}, particle {row}, coordinate {col}")


def _batches(model, batch_size, seed):
    if model.n_data is None or batch_size is None or batch_size >= model.n_data:
        while True:
            yield None
    else:
        yield from minibatch_stream(model.n_data, batch_size, seed)


def _check_run_args(init, iterations):
    x = as_particles(init).copy()
    if int(iterations) < 1:
        raise InputError(f"need at least one iteration, got {iterations}")
    if not np.all(np.isfinite(x)):
        raise InputError("initial particles contain non-finite values")
    return x


def run_mk_svgd(
    model,
    init,
    grid,
    iterations,
    step,
    seed=0,
    weight_cadence=1,
    weight_mode=CLOSED_FORM,
    weight_step=0.05,
    batch_size=None,
    callback=None,
    record_positions=False,
    fudge=1e-6,
):
    """Run multi-kernel SVGD and return ``(particles, trace)``.

    Each iteration evaluates scores (on a minibatch when ``batch_size`` is set
    and the model has data), moves the particles along the weighted direction
    with AdaGrad, and every ``weight_cadence`` iterations recomputes the weights
    from the V-statistic KSD of the same pairwise pass: ``closed_form`` uses
    ``sqrt(S_i / sum S)``, ``exact_argmax`` uses ``S / ||S||`` and
    ``adagrad_ascent`` takes one projected AdaGrad step on ``<w, S>``.
    ``callback(t, x)`` may return a dict of task metrics stored in the trace.
    """
    x = _check_run_args(init, iterations)
    if not isinstance(grid, BandwidthGrid):
        grid = BandwidthGrid(tuple(np.atleast_1d(grid)))
    if weight_mode not in WEIGHT_MODES:
        raise InputError(f"unknown weight mode {weight_mode!r}")
    if int(weight_cadence) < 1:
        raise InputError("weight cadence must be a positive integer")
    m = len(grid)
    w = uniform_weights(m)
    state = AdaGradState.zeros(x.shape, step, fudge)
    w_state = AdaGradState.zeros((m,), weight_step, fudge)
    trace = RunTrace([f"{h:g}" for h in grid])
    batches = _batches(model, batch_size, seed)
    start = time.perf_counter()
    for t in range(int(iterations)):
        scores = model.score(x, next(batches))
        _check_finite(scores, "score", t)
        ev = build_pairwise_eval(x, grid)
        phi = combine(w, per_kernel_directions(ev, scores))
        ksd = ksd_per_kernel(ev, scores, V_STATISTIC)
        delta, state = adagrad_step(state, phi)
        x = x + delta
        _check_finite(x, "position", t)
        degenerate = is_degenerate(ksd)
        metrics = callback(t, x) if callback is not None else None
        trace.append(
            IterationRecord(t, w, ksd.per_kernel, mksd(ksd, w), time.perf_counter() - start, degenerate, metrics or {})
        )
        if record_positions:
            trace.positions.append(x.copy())
        if (t + 1) % weight_cadence == 0:
            if weight_mode == CLOSED_FORM:
                w = optimal_weights(ksd)
            elif weight_mode == EXACT_ARGMAX:
                w = optimal_weights(ksd, ARGMAX_RULE)
            else:
                dw, w_state = adagrad_step(w_state, ksd.per_kernel)
                w = normalize_weights(w + dw)
        if degenerate:
            log.debug("iteration %d: no kernel has positive discrepancy, uniform weights", t)
    return x, trace


def run_svgd(
    model,
    init,
    bandwidth,
    iterations,
    step,
    seed=0,
    batch_size=None,
    callback=None,
    record_positions=False,
    fudge=1e-6,
):
    """Vanilla SVGD with a fixed bandwidth or ``bandwidth="median"``."""
    x = _check_run_args(init, iterations)
    median = isinstance(bandwidth, str)
    if median and bandwidth != "median":
        raise InputError(f"unknown bandwidth rule {bandwidth!r}")
    state = AdaGradState.zeros(x.shape, step, fudge)
    trace = RunTrace(["median" if median else f"{float(bandwidth):g}"])
    batches = _batches(model, batch_size, seed)
    one = np.ones(1)
    start = time.perf_counter()
    for t in range(int(iterations)):
        scores = model.score(x, next(batches))
        _check_finite(scores, "score", t)
        h = median_heuristic(x) if median else bandwidth
        ev = build_pairwise_eval(x, BandwidthGrid((h,)))
        phi = svgd_direction(ev, scores)
        ksd = ksd_per_kernel(ev, scores, V_STATISTIC)
        delta, state = adagrad_step(state, phi)
        x = x + delta
        _check_finite(x, "position", t)
        metrics = dict(callback(t, x) or {}) if callback is not None else {}
        if median:
            metrics["bandwidth"] = h
        trace.append(IterationRecord(t, one, ksd.per_kernel, float(ksd.per_kernel[0]), time.perf_counter() - start, False, metrics))
        if record_positions:
            trace.positions.append(x.copy())
    return x, trace
