"""Independent reference implementations used to check the package.

Everything here is deliberately written from first principles (textbook
covariance-form Kalman recursions, stacked joint Gaussians, permutation
enumeration, explicit two-state chain enumeration) and shares no code
with the paths it validates.
"""

import itertools
import math

import numpy as np
from scipy.stats import multivariate_normal


class ReferenceKalman:
    """Covariance-form Kalman filter for x_t = D x_{t-1} + w, y = P x + o + v."""

    def __init__(self, transition, process_cov, projection, offset, obs_cov, mean, cov):
        self.d = np.asarray(transition, dtype=float)
        self.q = np.asarray(process_cov, dtype=float)
        self.p = np.asarray(projection, dtype=float)
        self.o = np.asarray(offset, dtype=float)
        self.r = np.asarray(obs_cov, dtype=float)
        self.mean = np.asarray(mean, dtype=float).copy()
        self.cov = np.asarray(cov, dtype=float).copy()

    def predict(self):
        self.mean = self.d @ self.mean
        self.cov = self.d @ self.cov @ self.d.T + self.q

    def update(self, y):
        y = np.asarray(y, dtype=float)
        innovation_cov = self.p @ self.cov @ self.p.T + self.r
        gain = self.cov @ self.p.T @ np.linalg.inv(innovation_cov)
        residual = y - (self.p @ self.mean + self.o)
        self.mean = self.mean + gain @ residual
        identity = np.eye(len(self.mean))
        joseph = identity - gain @ self.p
        self.cov = joseph @ self.cov @ joseph.T + gain @ self.r @ gain.T

    def log_predictive(self, y):
        innovation_cov = self.p @ self.cov @ self.p.T + self.r
        return float(
            multivariate_normal.logpdf(
                np.asarray(y, dtype=float), self.p @ self.mean + self.o, innovation_cov
            )
        )


def stacked_log_marginal(observations, transition, process_cov, projection, offset, obs_cov,
                         prior_mean, prior_cov):
    """Log density of a whole observation sequence as one stacked Gaussian.

    The latent chain starts at the prior and advances L times; the joint of
    the projected observations is Gaussian with block covariance
    S[j', j] = P D^(j'-j) C_j P^T (+ Sigma on the diagonal), C_0 the prior
    covariance and C_{j+1} = D C_j D^T + Q.
    """
    d = np.asarray(transition, dtype=float)
    q = np.asarray(process_cov, dtype=float)
    p = np.asarray(projection, dtype=float)
    o = np.asarray(offset, dtype=float)
    r = np.asarray(obs_cov, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in observations]
    steps = len(ys)
    dim = p.shape[0]

    state_means = [np.asarray(prior_mean, dtype=float)]
    state_covs = [np.asarray(prior_cov, dtype=float)]
    for _ in range(steps - 1):
        state_means.append(d @ state_means[-1])
        state_covs.append(d @ state_covs[-1] @ d.T + q)

    mean = np.concatenate([p @ m + o for m in state_means])
    cov = np.zeros((steps * dim, steps * dim))
    for j in range(steps):
        for k in range(j, steps):
            # Cov(x_k, x_j) = D^(k-j) C_j
            cross = np.linalg.matrix_power(d, k - j) @ state_covs[j]
            block = p @ cross @ p.T
            cov[k * dim:(k + 1) * dim, j * dim:(j + 1) * dim] = block
            cov[j * dim:(j + 1) * dim, k * dim:(k + 1) * dim] = block.T
        cov[j * dim:(j + 1) * dim, j * dim:(j + 1) * dim] += r
    return float(multivariate_normal.logpdf(np.concatenate(ys), mean, cov))


def brute_force_max_matching(weights, threshold):
    """Best total weight over all matchings with per-pair threshold.

    Enumerates padded permutations; pairs below the threshold are left
    unmatched. Returns (best total, best pair list). Totals use fsum so
    they are exactly reproducible.
    """
    weights = np.asarray(weights, dtype=float)
    n_rows, n_cols = weights.shape
    size = max(n_rows, n_cols)
    best_total = 0.0
    best_pairs = []
    for perm in itertools.permutations(range(size)):
        pairs = [
            (r, perm[r])
            for r in range(n_rows)
            if perm[r] < n_cols and weights[r, perm[r]] >= threshold and weights[r, perm[r]] > 0.0
        ]
        total = math.fsum(weights[r, c] for r, c in pairs)
        if total > best_total:
            best_total = total
            best_pairs = pairs
    return best_total, best_pairs


def brute_force_ospa(set_a, set_b, cutoff, order):
    a = np.atleast_2d(np.asarray(set_a, dtype=float)) if len(set_a) else np.zeros((0, 1))
    b = np.atleast_2d(np.asarray(set_b, dtype=float)) if len(set_b) else np.zeros((0, 1))
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return cutoff
    if len(a) > len(b):
        a, b = b, a
    m, n = len(a), len(b)
    best = math.inf
    for assignment in itertools.permutations(range(n), m):
        cost = math.fsum(
            min(float(np.linalg.norm(a[i] - b[assignment[i]])), cutoff) ** order
            for i in range(m)
        )
        best = min(best, cost)
    total = best + cutoff**order * (n - m)
    return (total / n) ** (1.0 / order)


def enumerate_visibility_posterior(prev_visible, nu, pi_v, lambda_v, swapped):
    """Brute-force filtering step: sum the joint over (v_prev, v_now)."""
    prior = {1: prev_visible, 0: 1.0 - prev_visible}
    transition = {
        (1, 1): pi_v, (1, 0): 1.0 - pi_v,
        (0, 1): 1.0 - pi_v, (0, 0): pi_v,
    }
    decay = math.exp(-lambda_v * nu)
    if swapped:
        likelihood = {1: 1.0 - decay, 0: decay}
    else:
        likelihood = {1: decay, 0: 1.0 - decay}
    joint = {
        v_now: sum(prior[v_prev] * transition[(v_prev, v_now)] for v_prev in (0, 1))
        * likelihood[v_now]
        for v_now in (0, 1)
    }
    total = joint[0] + joint[1]
    if total <= 0.0:
        pred = sum(prior[v_prev] * transition[(v_prev, 1)] for v_prev in (0, 1))
        return pred
    return joint[1] / total


def random_spd(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim))
    return scale * (a @ a.T + dim * np.eye(dim))
