"""Target distributions as differentiable potentials V(x) = -ln(density),
known up to an additive constant, with analytic gradients.

Every target evaluates vectorized: ``potential`` maps (d,) -> float and
(M, d) -> (M,); ``grad_potential`` maps (d,) -> (d,) and (M, d) -> (M, d).
No autodiff anywhere; gradients are checked against finite differences in
the test suite.
"""

import numpy as np
from scipy.special import logsumexp


class TargetDensity:
    """Base contract for an unnormalized log-density."""

    dim: int
    supports_minibatch: bool = False
    is_zero_potential: bool = False

    def potential(self, x):
        raise NotImplementedError

    def grad_potential(self, x):
        raise NotImplementedError

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.shape[-1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {x2.shape[-1]}")
        return x2, single


class ZeroPotential(TargetDensity):
    """V == 0 everywhere (improper flat target).

    Used to drive pure-interaction dynamics; the implicit-EQ scheme takes its
    explicit closed-form path when the potential part vanishes.
    """

    is_zero_potential = True

    def __init__(self, dim: int):
        self.dim = int(dim)

    def potential(self, x):
        x2, single = self._as_batch(x)
        v = np.zeros(x2.shape[0])
        return float(v[0]) if single else v

    def grad_potential(self, x):
        x2, single = self._as_batch(x)
        g = np.zeros_like(x2)
        return g[0] if single else g


class DoubleBanana(TargetDensity):
    """Two-dimensional banana-shaped density:

        V(x) = |x|^2 / 2 + (ln(x1^2 + 100 (x2 - x1^2)^2) - ln 30)^2 / 2.

    The log argument vanishes only at the origin, where the gradient is
    singular; evaluation there raises instead of returning Inf.
    """

    dim = 2

    def _inner(self, x2):
        x1, y = x2[:, 0], x2[:, 1]
        return x1 * x1 + 100.0 * (y - x1 * x1) ** 2

    def potential(self, x):
        x2, single = self._as_batch(x)
        u = self._inner(x2)
        if np.any(u == 0.0):
            raise ValueError("potential undefined at the origin (log singularity)")
        v = 0.5 * np.sum(x2 * x2, axis=-1) + 0.5 * (np.log(u) - np.log(30.0)) ** 2
        return float(v[0]) if single else v

    def grad_potential(self, x):
        x2, single = self._as_batch(x)
        x1, y = x2[:, 0], x2[:, 1]
        u = self._inner(x2)
        if np.any(u == 0.0):
            raise ValueError("gradient singular at the origin (log singularity)")
        du = np.empty_like(x2)
        du[:, 0] = 2.0 * x1 - 400.0 * x1 * (y - x1 * x1)
        du[:, 1] = 200.0 * (y - x1 * x1)
        coef = (np.log(u) - np.log(30.0)) / u
        g = x2 + coef[:, None] * du
        return g[0] if single else g


class GaussianMixture(TargetDensity):
    """Mixture of Gaussians with full covariances.

    The potential keeps the normalizing constants (cheap, and it makes the
    free-energy trace an absolute KL estimate); gradients are the
    responsibility-weighted sum of the component gradients, computed through
    log-sum-exp so far-out points neither overflow nor underflow.
    """

    def __init__(self, weights, means, covariances):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        covs = np.asarray(covariances, dtype=np.float64)
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.weights <= 0):
            raise ValueError("mixture weights must be positive")
        self.dim = self.means.shape[1]
        self.n_components = self.means.shape[0]
        if covs.shape != (self.n_components, self.dim, self.dim):
            raise ValueError("covariances must be (k, d, d)")
        self.covariances = covs
        # Cholesky both validates SPD and gives the log-determinants.
        chols = np.linalg.cholesky(covs)
        self._precisions = np.linalg.inv(covs)
        logdets = 2.0 * np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)
        self._log_norm = -0.5 * (self.dim * np.log(2.0 * np.pi) + logdets)
        self._log_weights = np.log(self.weights)

    def _logpdfs_and_scaled_diffs(self, x2):
        # per component: log w_i + log N(x | mu_i, Sigma_i) and prec_i (x - mu_i);
        # a small loop over components beats a 3-operand einsum by ~20x here
        m = x2.shape[0]
        lp = np.empty((m, self.n_components))
        dp = np.empty((m, self.n_components, self.dim))
        for i in range(self.n_components):
            diff = x2 - self.means[i]
            dpi = diff @ self._precisions[i]
            dp[:, i, :] = dpi
            lp[:, i] = (
                self._log_weights[i]
                + self._log_norm[i]
                - 0.5 * np.einsum("md,md->m", dpi, diff)
            )
        return lp, dp

    def potential(self, x):
        x2, single = self._as_batch(x)
        lp, _ = self._logpdfs_and_scaled_diffs(x2)
        v = -logsumexp(lp, axis=1)
        return float(v[0]) if single else v

    def grad_potential(self, x):
        x2, single = self._as_batch(x)
        lp, dp = self._logpdfs_and_scaled_diffs(x2)
        lp -= lp.max(axis=1, keepdims=True)
        resp = np.exp(lp)
        resp /= resp.sum(axis=1, keepdims=True)                   # (M, k)
        g = np.einsum("mk,mkd->md", resp, dp)
        return g[0] if single else g


def gaussian_target(dim: int, mean=0.0, variance: float = 1.0) -> GaussianMixture:
    """Isotropic Gaussian as a one-component mixture."""
    mu = np.broadcast_to(np.asarray(mean, dtype=np.float64), (dim,))
    cov = variance * np.eye(dim)
    return GaussianMixture([1.0], [mu], [cov])


def star_mixture() -> GaussianMixture:
    """Five equal-weight components arranged by repeated 72-degree rotation
    of mean (1.5, 0) and covariance diag(1, 0.01); each covariance is the
    full similarity transform R D R^T so it stays symmetric positive
    definite with spectrum {1, 0.01}."""
    theta = 2.0 * np.pi / 5.0
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    base_mean = np.array([1.5, 0.0])
    base_cov = np.diag([1.0, 0.01])
    means, covs = [], []
    r_i = np.eye(2)
    for _ in range(5):
        means.append(r_i @ base_mean)
        covs.append(r_i @ base_cov @ r_i.T)
        r_i = rot @ r_i
    return GaussianMixture(np.full(5, 0.2), means, covs)


def eight_mixture() -> GaussianMixture:
    """Eight equal-weight components on a ring of radius ~4, covariance 0.2 I."""
    means = [
        (0.0, 4.0), (2.8, 2.8), (4.0, 0.0), (-2.8, 2.8),
        (-4.0, 0.0), (-2.8, -2.8), (0.0, -4.0), (2.8, -2.8),
    ]
    covs = [0.2 * np.eye(2)] * 8
    return GaussianMixture(np.full(8, 0.125), means, covs)


def _sigmoid(m: np.ndarray) -> np.ndarray:
    # overflow-free on both tails
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


class LogisticRegressionTarget(TargetDensity):
    """Bayesian logistic regression posterior over the weight vector.

    With features c_t (rows of an Ntilde x p matrix), labels y_t in {-1, +1},
    and Gaussian prior N(0, alpha I):

        V(w) = (Ntilde / |B|) * sum_{t in B} ln(1 + exp(-y_t w.c_t))
               + |w|^2 / (2 alpha)

    for a batch B of row indices (full data when B is None).  Mini-batch
    gradients are unbiased estimates of the full-data gradient.
    """

    supports_minibatch = True

    def __init__(self, features, labels, prior_alpha: float = 1.0):
        self.features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64).reshape(-1)
        if self.features.ndim != 2 or self.features.shape[0] != labels.size:
            raise ValueError("features must be (Ntilde, p) matching labels")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be in {-1, +1}")
        if not prior_alpha > 0:
            raise ValueError("prior_alpha must be positive")
        self.labels = labels
        self.prior_alpha = float(prior_alpha)
        self.n_data = self.features.shape[0]
        self.dim = self.features.shape[1]

    def _batch_arrays(self, batch):
        if batch is None:
            return self.features, self.labels
        idx = np.asarray(batch, dtype=np.intp)
        if idx.size == 0:
            raise ValueError("empty mini-batch")
        if idx.min() < 0 or idx.max() >= self.n_data:
            raise ValueError("batch indices out of range")
        return self.features[idx], self.labels[idx]

    def potential(self, x, batch=None):
        w2, single = self._as_batch(x)
        feats, labs = self._batch_arrays(batch)
        margins = -labs[None, :] * (w2 @ feats.T)            # (M, |B|)
        loss = np.logaddexp(0.0, margins).mean(axis=1) * self.n_data
        v = loss + 0.5 * np.sum(w2 * w2, axis=1) / self.prior_alpha
        return float(v[0]) if single else v

    def grad_potential(self, x, batch=None):
        w2, single = self._as_batch(x)
        feats, labs = self._batch_arrays(batch)
        margins = -labs[None, :] * (w2 @ feats.T)
        sig = _sigmoid(margins)
        scale = self.n_data / feats.shape[0]
        g = -scale * (sig * labs[None, :]) @ feats + w2 / self.prior_alpha
        return g[0] if single else g

    def minibatch_view(self, batch) -> "TargetDensity":
        """Fixed-batch view usable anywhere a TargetDensity is expected."""
        return _BatchView(self, np.asarray(batch, dtype=np.intp))

    def predict_proba(self, omegas: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Posterior-averaged P(y=+1 | c) over weight particles (N, p)."""
        omegas = np.atleast_2d(np.asarray(omegas, dtype=np.float64))
        logits = features @ omegas.T                        # (M, N)
        return _sigmoid(logits).mean(axis=1)


class _BatchView(TargetDensity):
    def __init__(self, target: LogisticRegressionTarget, batch: np.ndarray):
        self._target = target
        self._batch = batch
        self.dim = target.dim

    def potential(self, x):
        return self._target.potential(x, batch=self._batch)

    def grad_potential(self, x):
        return self._target.grad_potential(x, batch=self._batch)
