"""Ensemble evaluation of particle approximations."""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from steinflow.errors import InputError

PROB_FLOOR = 1e-12


@dataclass
class EvalReport:
    accuracy: float | None = None
    rmse: float | None = None
    test_log_likelihood: float | None = None
    mean: np.ndarray | None = None
    covariance: np.ndarray | None = None

    def as_dict(self):
        out = {}
        for key in ("accuracy", "rmse", "test_log_likelihood"):
            value = getattr(self, key)
            if value is not None:
                out[key] = float(value)
        if self.mean is not None:
            out["mean"] = [float(v) for v in np.ravel(self.mean)]
        if self.covariance is not None:
            out["covariance"] = [[float(v) for v in row] for row in np.atleast_2d(self.covariance)]
        return out


def classification_metrics(probs, labels):
    """Accuracy and mean log predictive probability of the particle ensemble.

    ``probs[k, t]`` is particle ``k``'s probability that test point ``t`` has
    label 1. Probabilities are averaged over particles before thresholding at
    0.5 and before taking logs.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    labels = np.asarray(labels, dtype=float).ravel()
    if probs.shape[1] != labels.size:
        raise InputError(f"probabilities {probs.shape} do not match {labels.size} labels")
    if np.any(probs < 0) or np.any(probs > 1):
        raise InputError("probabilities must lie in [0, 1]")
    ensemble = probs.mean(axis=0)
    accuracy = float(np.mean((ensemble > 0.5) == (labels == 1)))
    p_true = np.where(labels == 1, ensemble, 1.0 - ensemble)
    log_lik = float(np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))
    return accuracy, log_lik


def regression_metrics(means, precisions, targets):
    """RMSE of the ensemble mean and test log-likelihood of the Gaussian mixture.

    ``means`` is ``(n_particles, n_test)``; ``precisions`` holds one noise
    precision per particle. All quantities are in original target units.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    precisions = np.asarray(precisions, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if means.shape[1] != targets.size or precisions.size != means.shape[0]:
        raise InputError(f"shapes disagree: means {means.shape}, precisions {precisions.shape}, targets {targets.shape}")
    if np.any(precisions <= 0):
        raise InputError("precisions must be positive")
    rmse = float(np.sqrt(np.mean((means.mean(axis=0) - targets) ** 2)))
    g = precisions[:, None]
    log_dens = 0.5 * np.log(g / (2.0 * np.pi)) - 0.5 * g * (means - targets[None, :]) ** 2
    log_lik = float(np.mean(logsumexp(log_dens, axis=0) - np.log(means.shape[0])))
    return rmse, log_lik


def particle_moments(particles):
    """Sample mean and ``n - 1`` covariance; covariance is ``None`` for one particle."""
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    mean = x.mean(axis=0)
    if x.shape[0] < 2:
        return mean, None
    return mean, np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
