"""Bootstrap particle filter baseline and the replicate-averaged reference.

The filter propagates every particle through the transition density, weights
by the observation log-density with max-subtraction in log space, records the
weighted mean and covariance before resampling, and resamples systematically
at every step. The replicate-averaged reference (`gold_standard`) gives the
high-accuracy posterior-mean trajectory that approximation errors are
measured against.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import WeightCollapseError
from .lgf import FilterOutput
from .model import (
    GaussianBelief,
    StateSpaceModel,
    _belief_from_symmetric,
    psd_factor,
    symmetrized,
)

__all__ = ["ParticleEnsemble", "systematic_resample", "pf_filter", "gold_standard"]


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted particle set: (M, d) positions and a length-M simplex vector."""

    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        particles = np.asarray(self.particles, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if particles.ndim != 2 or particles.shape[0] < 1:
            raise ValueError("particles must be an (M, d) array with M >= 1")
        if weights.shape != (particles.shape[0],):
            raise ValueError("weights must be a length-M vector")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def covariance(self) -> np.ndarray:
        centered = self.particles - self.mean()
        return symmetrized((self.weights[:, None] * centered).T @ centered)


def systematic_resample(weights: np.ndarray, u: float) -> np.ndarray:
    """Indices drawn by systematic resampling with a single uniform u in [0, 1)."""
    m = weights.shape[0]
    positions = (u + np.arange(m)) / m
    indices = np.searchsorted(np.cumsum(weights), positions)
    return np.clip(indices, 0, m - 1)


def normalize_log_weights(log_weights: np.ndarray, t: int | None = None) -> np.ndarray:
    """exp-normalize with max-subtraction; raises on total weight collapse."""
    top = log_weights.max()
    if not np.isfinite(top):
        where = "" if t is None else f" at time step {t + 1}"
        raise WeightCollapseError(f"all particle weights underflowed to zero{where}")
    w = np.exp(log_weights - top)
    return w / w.sum()


def pf_filter(model: StateSpaceModel, observations, M: int, init: GaussianBelief,
              seed) -> FilterOutput:
    """Bootstrap particle filter; deterministic given the seed.

    Filtered means and sample covariances are recorded from the weighted
    ensemble before resampling. The predictive slots hold the unweighted
    statistics of the propagated ensemble.
    """
    if M < 1:
        raise ValueError("need at least one particle")
    observations = np.asarray(observations)
    rng = np.random.default_rng(seed)
    trans = model.transition
    d = trans.dim
    particles = init.mean + rng.standard_normal((M, d)) @ init.cholesky_factor.T
    f_t = np.ascontiguousarray(trans.F.T)
    noise_t = np.ascontiguousarray(psd_factor(trans.W).T)
    obs_model = model.observation

    preds: list[GaussianBelief] = []
    filts: list[GaussianBelief] = []
    secs: list[float] = []

    for t, y in enumerate(observations):
        started = time.perf_counter()
        particles = particles @ f_t
        particles += rng.standard_normal((M, d)) @ noise_t

        pred_mean = particles.mean(axis=0)
        centered = particles - pred_mean
        pred_cov = symmetrized(centered.T @ centered / M)

        log_w = obs_model.log_density_batch(y, particles)
        ensemble = ParticleEnsemble(particles, normalize_log_weights(log_w, t))
        mean = ensemble.mean()
        cov = ensemble.covariance()

        secs.append(time.perf_counter() - started)
        preds.append(_belief_from_symmetric(pred_mean, pred_cov))
        filts.append(_belief_from_symmetric(mean, cov))

        indices = systematic_resample(ensemble.weights, rng.random())
        particles = ensemble.particles[indices]

    zeros = (0,) * len(filts)
    return FilterOutput(tuple(preds), tuple(filts), zeros, tuple(secs))


def gold_standard(model: StateSpaceModel, observations, M: int, R: int, seeds,
                  init: GaussianBelief) -> tuple[np.ndarray, np.ndarray]:
    """Replicate-averaged particle-filter posterior mean.

    Averages R independent runs with M particles each and returns
    (reference means (T, d), between-replicate standard error (T, d)).
    The standard error is NaN for R = 1.
    """
    if R < 1:
        raise ValueError("need at least one replicate")
    seeds = list(seeds)
    if len(seeds) != R:
        raise ValueError(f"expected {R} seeds, got {len(seeds)}")
    runs = np.array([pf_filter(model, observations, M, init, s).means for s in seeds])
    reference = runs.mean(axis=0)
    if R == 1:
        se = np.full_like(reference, np.nan)
    else:
        se = runs.std(axis=0, ddof=1) / np.sqrt(R)
    return reference, se
