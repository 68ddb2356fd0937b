"""Target distributions exposing score functions.

Each model has ``dim``, ``n_data`` (``None`` for models without data) and
``score(positions, batch=None)`` returning ``grad log p`` row-wise for an
``(n, dim)`` array of particles. Data-backed models rescale the likelihood of
a minibatch ``batch`` (an index array) by ``n_data / len(batch)``.
"""

import numpy as np
from scipy.special import expit, log_expit

from steinflow.errors import InputError, NumericalError

LOG_2PI = np.log(2.0 * np.pi)


def _positions(positions, dim):
    x = np.asarray(positions, dtype=float)
    if x.ndim == 1:
        x = x[None, :] if dim > 1 or x.size == 1 else x[:, None]
    if x.ndim != 2 or x.shape[1] != dim:
        raise InputError(f"positions must have shape (n, {dim}), got {np.shape(positions)}")
    return x


class ScoreModel:
    """Interface shared by all targets."""

    dim = None
    n_data = None

    def score(self, positions, batch=None):
        raise NotImplementedError

    def log_density(self, positions, batch=None):
        """Unnormalized log-density; optional."""
        raise NotImplementedError

    def init_particles(self, n, rng):
        raise NotImplementedError

    def _batch(self, batch):
        if batch is None:
            return np.arange(self.n_data)
        batch = np.asarray(batch, dtype=int).ravel()
        if batch.size == 0:
            raise InputError("minibatch is empty")
        return batch


class GaussianTarget(ScoreModel):
    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise InputError(f"covariance must be {d}x{d}, got {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=1e-12):
            raise InputError("covariance is not symmetric")
        eig = np.linalg.eigvalsh(self.cov)
        if eig.min() <= 0:
            raise InputError(f"covariance is not positive definite (min eigenvalue {eig.min()})")
        self.precision = np.linalg.inv(self.cov)
        self._logdet = float(np.sum(np.log(eig)))
        self.dim = d

    def score(self, positions, batch=None):
        x = _positions(positions, self.dim)
        return -(x - self.mean) @ self.precision

    def log_density(self, positions, batch=None):
        z = _positions(positions, self.dim) - self.mean
        quad = np.einsum("nd,de,ne->n", z, self.precision, z)
        return -0.5 * (quad + self._logdet + self.dim * LOG_2PI)

    def sample(self, n, rng):
        return rng.multivariate_normal(self.mean, self.cov, size=n)

    def init_particles(self, n, rng):
        return rng.standard_normal((n, self.dim))


# the 2-D target of the toy experiment
TOY_MEAN = np.array([-0.6871, 0.8010])
TOY_COV = np.array([[0.2260, 0.1652], [0.1652, 0.6779]])


def toy_gaussian():
    return GaussianTarget(TOY_MEAN, TOY_COV)


class BlrPosterior(ScoreModel):
    """Hierarchical Bayesian logistic regression.

    Particles are ``[theta (p), log alpha]`` with ``theta ~ N(0, 1/alpha)`` and
    ``alpha ~ Gamma(a, rate=b)``. ``a = 0`` gives the improper prior
    ``p(alpha) ∝ exp(-b alpha) / alpha``.
    """

    def __init__(self, features, labels, a=1.0, b=0.01):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float).ravel()
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise InputError("features and labels disagree in length")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise InputError("labels must be 0/1")
        if a < 0 or b <= 0:
            raise InputError(f"invalid Gamma hyperparameters a={a}, b={b}")
        self.a = float(a)
        self.b = float(b)
        self.n_data, self.p = self.features.shape
        self.dim = self.p + 1

    def _split(self, positions):
        x = _positions(positions, self.dim)
        return x[:, :-1], x[:, -1]

    def score(self, positions, batch=None):
        theta, log_alpha = self._split(positions)
        idx = self._batch(batch)
        xb, yb = self.features[idx], self.labels[idx]
        alpha = np.exp(log_alpha)
        scale = self.n_data / idx.size
        resid = yb[None, :] - expit(theta @ xb.T)
        grad_theta = scale * resid @ xb - alpha[:, None] * theta
        sq = np.einsum("np,np->n", theta, theta)
        grad_log_alpha = 0.5 * self.p - 0.5 * alpha * sq + self.a - self.b * alpha
        return np.column_stack([grad_theta, grad_log_alpha])

    def log_density(self, positions, batch=None):
        theta, log_alpha = self._split(positions)
        idx = self._batch(batch)
        xb, yb = self.features[idx], self.labels[idx]
        z = theta @ xb.T
        loglik = yb * log_expit(z) + (1.0 - yb) * log_expit(-z)
        alpha = np.exp(log_alpha)
        sq = np.einsum("np,np->n", theta, theta)
        log_prior_theta = 0.5 * self.p * (log_alpha - LOG_2PI) - 0.5 * alpha * sq
        # Gamma density in log space, including the exp Jacobian
        log_prior_alpha = self.a * log_alpha - self.b * alpha
        return self.n_data / idx.size * loglik.sum(axis=1) + log_prior_theta + log_prior_alpha

    def init_particles(self, n, rng):
        alpha = rng.gamma(max(self.a, 1.0), 1.0 / self.b, size=n)
        theta = rng.standard_normal((n, self.p)) / np.sqrt(alpha)[:, None]
        return np.column_stack([theta, np.log(alpha)])


def predictive_blr(positions, features):
    """Per-particle class-1 probabilities, shape ``(n_particles, n_test)``."""
    x = np.asarray(positions, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    features = np.atleast_2d(np.asarray(features, dtype=float))
    p = features.shape[1]
    if x.shape[1] not in (p, p + 1):
        raise InputError(f"particles of width {x.shape[1]} do not fit {p} features")
    return expit(x[:, :p] @ features.T)


class BnnLayout:
    """Flattened parameter layout ``[W1, b1, w2, b2, log lambda, log gamma]``."""

    def __init__(self, n_features, hidden):
        self.p = int(n_features)
        self.hidden = int(hidden)
        h, p = self.hidden, self.p
        self.n_weights = h * (p + 1) + h + 1
        self.dim = self.n_weights + 2
        self.w1 = slice(0, p * h)
        self.b1 = slice(p * h, p * h + h)
        self.w2 = slice(p * h + h, p * h + 2 * h)
        self.b2 = p * h + 2 * h
        self.log_lambda = self.n_weights
        self.log_gamma = self.n_weights + 1

    @classmethod
    def from_dim(cls, dim, n_features):
        hidden, rem = divmod(dim - 3, n_features + 2)
        if rem or hidden < 1:
            raise InputError(f"parameter width {dim} does not match {n_features} features")
        return cls(n_features, hidden)

    def block_name(self, j):
        for name in ("w1", "b1", "w2"):
            sl = getattr(self, name)
            if sl.start <= j < sl.stop:
                return name
        return {self.b2: "b2", self.log_lambda: "log_lambda", self.log_gamma: "log_gamma"}[j]

    def unpack(self, x):
        n = x.shape[0]
        return (
            x[:, self.w1].reshape(n, self.p, self.hidden),
            x[:, self.b1],
            x[:, self.w2],
            x[:, self.b2],
        )


def bnn_forward(x, layout, features):
    """Network outputs ``(n_particles, n_points)`` plus hidden pre-activations."""
    w1, b1, w2, b2 = layout.unpack(x)
    pre = features @ w1 + b1[:, None, :]
    hid = np.maximum(pre, 0.0)
    out = (hid @ w2[:, :, None])[:, :, 0] + b2[:, None]
    return out, pre, hid


def _require_finite(arr, stage):
    if not np.all(np.isfinite(arr)):
        row = np.argwhere(~np.isfinite(arr))[0][0]
        raise NumericalError(f"non-finite BNN values in {stage} (particle {row})")


class BnnPosterior(ScoreModel):
    """One-hidden-layer ReLU regression network with Gaussian noise.

    Weights share the prior ``N(0, 1/lambda)``; the noise precision is
    ``gamma``. Both precisions carry Gamma hyperpriors and are sampled in log
    space. Features and targets are expected standardized.
    """

    def __init__(self, features, targets, hidden=50, a_gamma=1.0, b_gamma=0.1, a_lambda=1.0, b_lambda=0.1):
        self.features = np.asarray(features, dtype=float)
        self.targets = np.asarray(targets, dtype=float).ravel()
        if self.features.ndim != 2 or self.features.shape[0] != self.targets.size:
            raise InputError("features and targets disagree in length")
        self.n_data, p = self.features.shape
        self.layout = BnnLayout(p, hidden)
        self.dim = self.layout.dim
        self.a_gamma, self.b_gamma = float(a_gamma), float(b_gamma)
        self.a_lambda, self.b_lambda = float(a_lambda), float(b_lambda)

    def score(self, positions, batch=None):
        x = _positions(positions, self.dim)
        with np.errstate(over="ignore", invalid="ignore"):
            return self._score(x, self._batch(batch))

    def _score(self, x, idx):
        lay = self.layout
        xb, yb = self.features[idx], self.targets[idx]
        scale = self.n_data / idx.size
        out, pre, hid = bnn_forward(x, lay, xb)
        _require_finite(out, "forward pass (network output)")
        resid = yb[None, :] - out
        gamma = np.exp(x[:, lay.log_gamma])
        lam = np.exp(x[:, lay.log_lambda])
        # d loglik / d out
        delta = scale * gamma[:, None] * resid
        _require_finite(delta, "output layer backward pass")
        _, _, w2, _ = lay.unpack(x)
        delta_hid = delta[:, :, None] * w2[:, None, :] * (pre > 0)
        _require_finite(delta_hid, "hidden layer backward pass")

        grad = np.empty_like(x)
        grad[:, lay.w1] = (xb.T @ delta_hid).reshape(x.shape[0], -1)
        grad[:, lay.b1] = delta_hid.sum(axis=1)
        grad[:, lay.w2] = (delta[:, None, :] @ hid)[:, 0, :]
        grad[:, lay.b2] = delta.sum(axis=1)
        weights = x[:, : lay.n_weights]
        grad[:, : lay.n_weights] -= lam[:, None] * weights
        sq_w = np.einsum("nk,nk->n", weights, weights)
        grad[:, lay.log_lambda] = 0.5 * lay.n_weights - 0.5 * lam * sq_w + self.a_lambda - self.b_lambda * lam
        sq_r = np.einsum("nb,nb->n", resid, resid)
        grad[:, lay.log_gamma] = scale * (0.5 * idx.size - 0.5 * gamma * sq_r) + self.a_gamma - self.b_gamma * gamma
        if not np.all(np.isfinite(grad)):
            row, col = np.argwhere(~np.isfinite(grad))[0]
            raise NumericalError(
                f"non-finite BNN score in {lay.block_name(col)} (particle {row}, coordinate {col})"
            )
        return grad


    def log_density(self, positions, batch=None):
        x = _positions(positions, self.dim)
        lay = self.layout
        idx = self._batch(batch)
        out, _, _ = bnn_forward(x, lay, self.features[idx])
        resid = self.targets[idx][None, :] - out
        log_gamma = x[:, lay.log_gamma]
        log_lambda = x[:, lay.log_lambda]
        loglik = 0.5 * (log_gamma - LOG_2PI)[:, None] - 0.5 * np.exp(log_gamma)[:, None] * resid**2
        weights = x[:, : lay.n_weights]
        log_prior = 0.5 * lay.n_weights * (log_lambda - LOG_2PI) - 0.5 * np.exp(log_lambda) * np.einsum("nk,nk->n", weights, weights)
        log_hyper = (
            self.a_gamma * log_gamma - self.b_gamma * np.exp(log_gamma)
            + self.a_lambda * log_lambda - self.b_lambda * np.exp(log_lambda)
        )
        return self.n_data / idx.size * loglik.sum(axis=1) + log_prior + log_hyper

    def init_particles(self, n, rng):
        lay = self.layout
        x = np.zeros((n, self.dim))
        x[:, lay.w1] = rng.standard_normal((n, lay.p * lay.hidden)) / np.sqrt(lay.p + 1)
        x[:, lay.w2] = rng.standard_normal((n, lay.hidden)) / np.sqrt(lay.hidden + 1)
        x[:, lay.log_lambda] = np.log(rng.gamma(self.a_lambda, 1.0 / self.b_lambda, size=n))
        # noise precision from the residual of the initial network on a data subset
        sub = rng.choice(self.n_data, size=min(self.n_data, 1000), replace=False)
        out, _, _ = bnn_forward(x, lay, self.features[sub])
        mse = np.mean((out - self.targets[sub][None, :]) ** 2, axis=1)
        x[:, lay.log_gamma] = -np.log(mse)
        return x


def predictive_bnn(positions, features, stats):
    """Per-particle predictive means and noise precisions in original units.

    ``features`` are raw (unstandardized); ``stats`` carries the training
    standardization (``x_mean``, ``x_std``, ``y_mean``, ``y_std``).
    """
    if stats is None or getattr(stats, "y_mean", None) is None:
        raise InputError("predictive_bnn needs feature and target standardization stats")
    x = np.asarray(positions, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    features = np.atleast_2d(np.asarray(features, dtype=float))
    layout = BnnLayout.from_dim(x.shape[1], features.shape[1])
    z = stats.transform(features)
    out, _, _ = bnn_forward(x, layout, z)
    means = stats.inverse_target(out)
    precisions = np.exp(x[:, layout.log_gamma]) / stats.y_std**2
    return means, precisions
