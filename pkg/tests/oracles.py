"""Independent reference implementations used to check the package.

Everything here is deliberately written from scratch against textbook
formulas (plain Kalman recursions, quadrature, polynomial arithmetic,
importance sampling) and never calls into the code paths it is used to
verify.
"""

import math

import numpy as np
from scipy.integrate import quad

from lgfilter import GaussianBelief, PoissonObservation, sample_population
from lgfilter.model import LogPosterior


def kalman_filter(F, W, H, R, init_mean, init_cov, observations):
    """Plain Kalman recursion; returns (means, covs, pred_means, pred_covs)."""
    m, v = np.asarray(init_mean, float), np.asarray(init_cov, float)
    means, covs, pred_means, pred_covs = [], [], [], []
    for y in observations:
        m = F @ m
        v = F @ v @ F.T + W
        pred_means.append(m.copy())
        pred_covs.append(v.copy())
        s = H @ v @ H.T + R
        gain = v @ H.T @ np.linalg.inv(s)
        m = m + gain @ (np.asarray(y, float) - H @ m)
        v = v - gain @ H @ v
        v = 0.5 * (v + v.T)
        means.append(m.copy())
        covs.append(v.copy())
    return np.array(means), np.array(covs), np.array(pred_means), np.array(pred_covs)


def rts_smoother(F, W, filtered_means, filtered_covs):
    """Fixed-interval smoother recomputing predictions from scratch."""
    n = len(filtered_means)
    sm = [filtered_means[-1]]
    sc = [filtered_covs[-1]]
    for t in range(n - 2, -1, -1):
        mp = F @ filtered_means[t]
        vp = F @ filtered_covs[t] @ F.T + W
        gain = filtered_covs[t] @ F.T @ np.linalg.inv(vp)
        sm.insert(0, filtered_means[t] + gain @ (sm[0] - mp))
        sc.insert(0, filtered_covs[t] + gain @ (sc[0] - vp) @ gain.T)
    return np.array(sm), np.array(sc)


def quad_posterior_moments(log_post, center, halfwidth):
    """Posterior mean and variance of a 1-D density by adaptive quadrature."""
    lo, hi = center - halfwidth, center + halfwidth
    grid = np.linspace(lo, hi, 401)
    peak = max(log_post(x) for x in grid)

    def density(x):
        return math.exp(log_post(x) - peak)

    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    z = quad(density, lo, hi, **opts)[0]
    mean = quad(lambda x: x * density(x), lo, hi, **opts)[0] / z
    var = quad(lambda x: (x - mean) ** 2 * density(x), lo, hi, **opts)[0] / z
    return mean, var


def bell_brute_force(coeffs, i, j):
    """Coefficient of x**i in (A1 x + A2 x**2 + ...)**j by polynomial powers."""
    if j == 0:
        return 1.0 if i == 0 else 0.0
    base = np.concatenate([[0.0], np.asarray(coeffs, float)])
    poly = np.array([1.0])
    for _ in range(j):
        poly = np.convolve(poly, base)
    return float(poly[i]) if i < poly.size else 0.0


def importance_posterior_mean(pred, obs, y, n_draws, seed):
    """Posterior mean by self-normalized importance sampling from the prior."""
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(pred.cov)
    draws = pred.mean + rng.standard_normal((n_draws, pred.dim)) @ chol.T
    log_w = obs.log_density_batch(y, draws)
    log_w -= log_w.max()
    w = np.exp(log_w)
    w /= w.sum()
    return w @ draws


def poisson_1d_problem(n_neurons, seed, prior_mean=0.0, prior_var=0.16, delta=0.03):
    """A single-step 1-D Poisson/Gaussian posterior for approximation tests.

    Returns (log-posterior bundle, predictive belief, concentration scale,
    observed counts).
    """
    rng = np.random.default_rng(seed)
    pop_seed, state_seed, count_seed = rng.integers(2**63, size=3)
    pop = sample_population(n_neurons, 1, pop_seed)
    if delta != pop.delta:
        from dataclasses import replace
        pop = replace(pop, delta=delta)
    obs = PoissonObservation(pop)
    true_x = prior_mean + math.sqrt(prior_var) * np.random.default_rng(state_seed).standard_normal(1)
    y = obs.sample(true_x, np.random.default_rng(count_seed))
    pred = GaussianBelief(np.array([prior_mean]), np.array([[prior_var]]))
    gamma = float(delta * np.sum(np.exp(pop.alpha) * np.sum(pop.beta**2, axis=1)) + 1.0 / prior_var)
    lp = LogPosterior(y, pred, obs)
    return lp, pred, gamma, y


def random_linear_gaussian_model(seed, d=3, n_obs=2, spectral_radius=0.85):
    """Random stable linear-Gaussian system for oracle comparisons."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((d, d))
    f *= spectral_radius / max(abs(np.linalg.eigvals(f)))
    a = rng.standard_normal((d, d))
    w = a @ a.T / d + 0.05 * np.eye(d)
    h = rng.standard_normal((n_obs, d))
    b = rng.standard_normal((n_obs, n_obs))
    r = b @ b.T / n_obs + 0.1 * np.eye(n_obs)
    x0 = rng.standard_normal(d)
    return f, 0.5 * (w + w.T), h, 0.5 * (r + r.T), x0
