"""Independent brute-force references used by the tests."""

import numpy as np

from steinflow.discrepancy import u_term
from steinflow.kernel import rbf_eval


def brute_u(x, y, sx, sy, h):
    k, grad_x, trace = rbf_eval(x, y, h)
    # gradient in the second argument: differentiate k(y, x) in its first slot
    _, grad_y, _ = rbf_eval(y, x, h)
    return u_term(sx, sy, k, grad_x, grad_y, trace)


def brute_ksd(x, scores, bandwidths, kind):
    n = x.shape[0]
    out = []
    for h in bandwidths:
        total = 0.0
        for j in range(n):
            for l in range(n):
                if kind == "U" and j == l:
                    continue
                total += brute_u(x[j], x[l], scores[j], scores[l], h)
        out.append(total / (n * (n - 1) if kind == "U" else n * n))
    return np.array(out)


def brute_direction(x, scores, h):
    """phi(x_i) = (1/n) sum_j [s_j k(x_j, x_i) + grad_{x_j} k(x_j, x_i)] by loops."""
    n, d = x.shape
    phi = np.zeros((n, d))
    for i in range(n):
        for j in range(n):
            k, grad, _ = rbf_eval(x[j], x[i], h)
            phi[i] += scores[j] * k + grad
    return phi / n


def fd_gradient(f, x, eps=1e-5):
    """Central differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def bootstrap_ustat_se(gram, rng, n_boot=500):
    """Bootstrap standard error of a U-statistic from its pairwise matrix."""
    n = gram.shape[0]
    diag = np.diag(gram)
    stats = np.empty(n_boot)
    for b in range(n_boot):
        c = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        stats[b] = (c @ gram @ c - c @ diag) / (n * (n - 1))
    return float(stats.std(ddof=1))
