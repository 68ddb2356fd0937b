"""Kernelized Stein discrepancy estimators and the closed-form kernel weights."""

from dataclasses import dataclass

import numpy as np

from steinflow.errors import InputError
from steinflow.kernel import check_weights

U_STATISTIC = "U"
V_STATISTIC = "V"


@dataclass(frozen=True)
class KsdEstimate:
    """Per-kernel KSD estimates over one particle set."""

    per_kernel: np.ndarray
    kind: str = V_STATISTIC

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.per_kernel, dtype=float))
        if not np.all(np.isfinite(s)):
            raise InputError(f"non-finite KSD estimate: {s}")
        if self.kind not in (U_STATISTIC, V_STATISTIC):
            raise InputError(f"unknown estimator kind {self.kind!r}")
        object.__setattr__(self, "per_kernel", s)

    def __len__(self):
        return self.per_kernel.size


def u_term(score_x, score_y, k_val, grad_x_k, grad_y_k, trace_hess):
    """Stein kernel ``u_p(x, y)`` from kernel value and derivatives at one pair.

    ``grad_x_k`` and ``grad_y_k`` are the gradients of ``k(x, y)`` in its first
    and second argument respectively.
    """
    arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (score_x, score_y, grad_x_k, grad_y_k)]
    if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
        raise InputError(f"dimension mismatch: {[a.shape for a in arrays]}")
    sx, sy, gx, gy = arrays
    return float(k_val * (sx @ sy) + sx @ gy + gx @ sy + trace_hess)


def _as_scores(scores, n, d):
    s = np.asarray(scores, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape != (n, d):
        raise InputError(f"scores must have shape {(n, d)}, got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InputError("scores contain non-finite entries")
    return s


def stein_gram_sums(kernel_eval, scores):
    """Per-kernel sums ``(sum_{j,l} u_i(x_j, x_l), sum_j u_i(x_j, x_j))``."""
    x = kernel_eval.positions
    n, d = x.shape
    s = _as_scores(scores, n, d)
    h = kernel_eval.bandwidths
    m = h.size
    k = kernel_eval.values
    # cross[j, l] = (x_j - x_l) . s_l
    cross = x @ s.T - np.einsum("ld,ld->l", x, s)[None, :]
    pair_mats = np.stack([s @ s.T, cross, kernel_eval.sqdist, np.ones((n, n))], axis=-1)
    sums = k.reshape(m, -1) @ pair_mats.reshape(-1, 4)
    k_ss, k_cross, k_sqdist, k_sum = sums.T
    # the two mixed terms are equal for a symmetric RBF Gram matrix
    mixed = -(4.0 / h) * k_cross
    trace = (2.0 * d / h) * k_sum - (4.0 / h**2) * k_sqdist
    total = k_ss + mixed + trace
    k_diag = np.diagonal(k, axis1=1, axis2=2)
    diag = k_diag @ np.einsum("jd,jd->j", s, s) + (2.0 * d / h) * k_diag.sum(axis=1)
    return total, diag


def stein_gram(kernel_eval, scores):
    """Matrices ``H[i, j, l] = u_i(x_j, x_l)``, shape ``(m, n, n)``."""
    x = kernel_eval.positions
    n, d = x.shape
    s = _as_scores(scores, n, d)
    h = kernel_eval.bandwidths[:, None, None]
    xs = x @ s.T
    xs_diag = np.diag(xs)
    # s_j . (x_j - x_l)  and  (x_j - x_l) . s_l
    left = xs_diag[:, None] - xs.T
    right = xs - xs_diag[None, :]
    k = kernel_eval.values
    return k * ((s @ s.T)[None] + (2.0 / h) * (left - right)[None] + 2.0 * d / h - 4.0 * kernel_eval.sqdist[None] / h**2)


def ksd_per_kernel(kernel_eval, scores, kind=V_STATISTIC):
    """U- or V-statistic KSD for every base kernel in ``kernel_eval``."""
    n = kernel_eval.n
    if kind == U_STATISTIC and n < 2:
        raise InputError("U-statistic needs at least two particles")
    if kind not in (U_STATISTIC, V_STATISTIC):
        raise InputError(f"unknown estimator kind {kind!r}")
    total, diag = stein_gram_sums(kernel_eval, scores)
    if kind == V_STATISTIC:
        return KsdEstimate(total / n**2, kind)
    return KsdEstimate((total - diag) / (n * (n - 1)), kind)


def _per_kernel(estimate):
    if isinstance(estimate, KsdEstimate):
        return estimate.per_kernel
    return np.atleast_1d(np.asarray(estimate, dtype=float))


def mksd(estimate, w):
    """Multi-kernel discrepancy ``<w, S>``."""
    s = _per_kernel(estimate)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.shape != s.shape:
        raise InputError(f"weights {w.shape} do not match estimate {s.shape}")
    return float(w @ s)


SQRT_RULE = "sqrt"
ARGMAX_RULE = "argmax"


def optimal_weights(estimate, rule=SQRT_RULE):
    """Closed-form kernel weights on the nonnegative unit sphere.

    ``rule="sqrt"`` gives ``w_i = sqrt(S_i / sum_j S_j)``, i.e. weights
    proportional to the per-kernel direction norms ``||phi_i|| = sqrt(S_i)``;
    this maximizes ``<w, sqrt(S)>``. ``rule="argmax"`` gives ``S / ||S||``, the
    exact maximizer of ``<w, S>``. Negative entries are clamped to zero; if
    nothing positive remains the uniform vector ``1/sqrt(m)`` is returned.
    """
    s = np.clip(_per_kernel(estimate), 0.0, None)
    if not s.sum() > 0:
        return np.full(s.size, 1.0 / np.sqrt(s.size))
    # rescale first so tiny (subnormal) entries do not overflow the norm
    s = s / s.max()
    if rule == SQRT_RULE:
        w = np.sqrt(s / s.sum())
    elif rule == ARGMAX_RULE:
        w = s / np.linalg.norm(s)
    else:
        raise InputError(f"unknown weight rule {rule!r}")
    return check_weights(w)


def is_degenerate(estimate):
    """True when no kernel has a positive discrepancy (uniform fallback)."""
    return not np.any(_per_kernel(estimate) > 0)
