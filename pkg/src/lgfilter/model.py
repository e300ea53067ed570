"""State-space model primitives.

Gaussian beliefs, linear-Gaussian transitions, pluggable observation models,
trajectory/observation simulation, and the per-step log-posterior bundle that
the Laplace machinery maximizes.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefiniteError

__all__ = [
    "GaussianBelief",
    "LinearGaussianTransition",
    "ObservationModel",
    "GaussianObservation",
    "FlatObservation",
    "Trajectory",
    "StateSpaceModel",
    "predict",
    "simulate",
    "LogPosterior",
    "log_posterior_l",
    "symmetrized",
    "psd_factor",
]


def symmetrized(a: np.ndarray) -> np.ndarray:
    """(A + A^T)/2, applied after every covariance-producing arithmetic step."""
    return 0.5 * (a + a.T)


def _check_symmetric(a: np.ndarray, name: str) -> None:
    gap = np.abs(a - a.T).max()
    if gap > 1e-12 * max(np.abs(a).max(), np.finfo(float).tiny):
        raise ValueError(f"{name} is not symmetric to within 1e-12 relative tolerance")


def psd_factor(w: np.ndarray) -> np.ndarray:
    """A matrix L with L @ L.T = W for symmetric positive semi-definite W.

    Uses Cholesky when W is strictly positive definite and an eigenvalue
    factorization (negative eigenvalues clipped at zero) otherwise, so that
    singular process noise such as a position-velocity model's W is accepted.
    """
    w = np.asarray(w, dtype=float)
    try:
        return np.linalg.cholesky(w)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(w)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise NotPositiveDefiniteError("matrix has a significantly negative eigenvalue")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a filtered/predictive/smoothed distribution.

    The covariance must be symmetric and strictly positive definite
    (validated by Cholesky factorization on construction).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("belief contains non-finite entries")
        _check_symmetric(cov, "covariance")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("covariance is not positive definite") from None
        mean.flags.writeable = False
        cov.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def cholesky_factor(self) -> np.ndarray:
        """Lower-triangular factor of the covariance (computed at validation)."""
        return self._chol


def _belief_from_symmetric(mean: np.ndarray, cov: np.ndarray) -> GaussianBelief:
    """Fast-path belief construction for freshly computed arrays.

    `cov` must come out of symmetrized() (exactly symmetric in floating
    point), and both arrays must be owned by the caller. The Cholesky
    factorization still gates positive definiteness, so the belief
    invariants hold; only the redundant re-checks are skipped.
    """
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("covariance is not positive definite") from None
    belief = object.__new__(GaussianBelief)
    mean.flags.writeable = False
    cov.flags.writeable = False
    chol.flags.writeable = False
    object.__setattr__(belief, "mean", mean)
    object.__setattr__(belief, "cov", cov)
    object.__setattr__(belief, "_chol", chol)
    return belief


@dataclass(frozen=True)
class LinearGaussianTransition:
    """x_t = F @ x_{t-1} + noise, noise ~ N(0, W) with W symmetric PSD."""

    F: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        f = np.array(self.F, dtype=float)
        w = np.array(self.W, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError("F must be a square matrix")
        if w.shape != f.shape:
            raise ValueError("W must have the same shape as F")
        _check_symmetric(w, "W")
        vals = np.linalg.eigvalsh(w)
        if vals.min() < -1e-10 * max(1.0, abs(vals.max())):
            raise NotPositiveDefiniteError("W has a negative eigenvalue")
        f.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "F", f)
        object.__setattr__(self, "W", w)

    @property
    def dim(self) -> int:
        return self.F.shape[0]


class ObservationModel(abc.ABC):
    """Observation density p(y | x) with gradient and optional analytic Hessian.

    `hessian_log_density` returns None when no analytic Hessian is available;
    callers then fall back to numerical differentiation.
    """

    @property
    @abc.abstractmethod
    def n_obs(self) -> int:
        """Dimension of one observation vector."""

    @abc.abstractmethod
    def log_density(self, y, x) -> float:
        """log p(y | x), normalization constants included."""

    @abc.abstractmethod
    def grad_log_density(self, y, x) -> np.ndarray:
        """Gradient of log p(y | x) with respect to the state x."""

    def hessian_log_density(self, y, x):
        """Analytic Hessian with respect to x, or None if not available."""
        return None

    @abc.abstractmethod
    def sample(self, x, rng: np.random.Generator):
        """Draw one observation at state x."""

    def log_density_batch(self, y, states: np.ndarray) -> np.ndarray:
        """log p(y | x) for each row of `states`. Default is a plain loop;
        models override this with a vectorized path where it matters."""
        return np.array([self.log_density(y, x) for x in states])

    def bind(self, y) -> "BoundObservation":
        """Close over a fixed observation, precomputing y-dependent terms."""
        return BoundObservation(self, y)

    def expansion_rate(self, w: np.ndarray):
        """Concentration scale of the log posterior for this model and process
        noise W, or None when the model defines no such scale."""
        return None


class BoundObservation:
    """log p(y | x) and derivatives for one fixed y."""

    def __init__(self, obs: ObservationModel, y):
        self._obs = obs
        self._y = y

    def value(self, x) -> float:
        return self._obs.log_density(self._y, x)

    def grad(self, x) -> np.ndarray:
        return self._obs.grad_log_density(self._y, x)

    def hessian(self, x):
        return self._obs.hessian_log_density(self._y, x)


class GaussianObservation(ObservationModel):
    """Linear-Gaussian observations y = H @ x + noise, noise ~ N(0, R)."""

    def __init__(self, H: np.ndarray, R: np.ndarray):
        self.H = np.asarray(H, dtype=float)
        self.R = np.asarray(R, dtype=float)
        if self.H.ndim != 2:
            raise ValueError("H must be a matrix")
        if self.R.shape != (self.H.shape[0], self.H.shape[0]):
            raise ValueError("R shape does not match H")
        _check_symmetric(self.R, "R")
        self._chol = np.linalg.cholesky(self.R)
        self._prec = symmetrized(np.linalg.inv(self.R))
        logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol))))
        self._log_norm = -0.5 * (self.H.shape[0] * math.log(2.0 * math.pi) + logdet)
        self._hess = symmetrized(-self.H.T @ self._prec @ self.H)

    @property
    def n_obs(self) -> int:
        return self.H.shape[0]

    def log_density(self, y, x) -> float:
        r = np.asarray(y, dtype=float) - self.H @ x
        return self._log_norm - 0.5 * float(r @ (self._prec @ r))

    def grad_log_density(self, y, x) -> np.ndarray:
        r = np.asarray(y, dtype=float) - self.H @ x
        return self.H.T @ (self._prec @ r)

    def hessian_log_density(self, y, x) -> np.ndarray:
        return self._hess

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        return self.H @ x + self._chol @ rng.standard_normal(self.n_obs)

    def log_density_batch(self, y, states: np.ndarray) -> np.ndarray:
        r = np.asarray(y, dtype=float)[None, :] - states @ self.H.T
        return self._log_norm - 0.5 * np.einsum("ij,ij->i", r @ self._prec, r)


class FlatObservation(ObservationModel):
    """Zero-information observation: constant log-density.

    Useful as a degenerate baseline; filtering against it reproduces the
    predictive distribution.
    """

    def __init__(self, n_obs: int = 1, dim: int = 1):
        self._n_obs = n_obs
        self._dim = dim

    @property
    def n_obs(self) -> int:
        return self._n_obs

    def log_density(self, y, x) -> float:
        return 0.0

    def grad_log_density(self, y, x) -> np.ndarray:
        return np.zeros(self._dim)

    def hessian_log_density(self, y, x) -> np.ndarray:
        return np.zeros((self._dim, self._dim))

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self._n_obs)

    def log_density_batch(self, y, states: np.ndarray) -> np.ndarray:
        return np.zeros(states.shape[0])


@dataclass(frozen=True)
class Trajectory:
    """A simulated or decoded state path x_1..x_T sampled every `dt` seconds."""

    states: np.ndarray
    dt: float

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("states must be a (T, d) array with T >= 1")
        if not np.all(np.isfinite(states)):
            raise ValueError("states contain non-finite entries")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        states.flags.writeable = False
        object.__setattr__(self, "states", states)

    @property
    def steps(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.steps + 1)


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear-Gaussian state transition paired with an observation model."""

    transition: LinearGaussianTransition
    observation: ObservationModel
    dt: float = 1.0

    @property
    def dim(self) -> int:
        return self.transition.dim


def predict(belief: GaussianBelief, trans: LinearGaussianTransition) -> GaussianBelief:
    """One analytic prediction step: N(m, V) -> N(F m, F V F^T + W)."""
    if belief.dim != trans.dim:
        raise ValueError(f"belief dimension {belief.dim} does not match transition dimension {trans.dim}")
    mean = trans.F @ belief.mean
    cov = symmetrized(trans.F @ belief.cov @ trans.F.T + trans.W)
    try:
        return _belief_from_symmetric(mean, cov)
    except NotPositiveDefiniteError:
        raise NotPositiveDefiniteError(
            "predicted covariance is not positive definite "
            "(degenerate W combined with a rank-deficient F)"
        ) from None


def simulate(model: StateSpaceModel, T: int, x0, seed) -> tuple[Trajectory, np.ndarray]:
    """Simulate T state transitions from x0 and one observation per state.

    `seed` may be an integer, a SeedSequence, or a Generator; identical seeds
    produce bit-identical output.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    x0 = np.asarray(x0, dtype=float)
    d = model.dim
    if x0.shape != (d,):
        raise ValueError(f"x0 must have shape ({d},)")
    rng = np.random.default_rng(seed)
    noise_factor = psd_factor(model.transition.W)
    F = model.transition.F
    states = np.empty((T, d))
    obs = []
    x = x0
    for t in range(T):
        x = F @ x + noise_factor @ rng.standard_normal(d)
        states[t] = x
        obs.append(model.observation.sample(x, rng))
    return Trajectory(states, model.dt), np.asarray(obs)


class LogPosterior:
    """The per-step objective l(x) = log p(y | x) + log N(x; m_pred, V_pred).

    Bundles the value, gradient, and (analytic, when available) Hessian, plus
    the increment scales that the numerical Hessian defaults to.
    """

    def __init__(self, y, pred: GaussianBelief, obs: ObservationModel,
                 use_analytic_obs_hessian: bool = True):
        self._bound = obs.bind(y)
        self._mean = pred.mean
        self.pred_mean = pred.mean
        chol = pred.cholesky_factor
        d = pred.dim
        self._pred_cov = pred.cov
        self._prec = np.linalg.inv(pred.cov)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        self._log_norm = -0.5 * (d * math.log(2.0 * math.pi) + logdet)
        self.dim = d
        probe = self._bound.hessian(pred.mean) if use_analytic_obs_hessian else None
        self._has_analytic = probe is not None
        self._hess_at_pred_mean = None if probe is None else probe - self._prec

    def value(self, x) -> float:
        dx = x - self._mean
        return self._bound.value(x) + self._log_norm - 0.5 * float(dx @ (self._prec @ dx))

    def grad(self, x) -> np.ndarray:
        return self._bound.grad(x) - self._prec @ (x - self._mean)

    def hessian(self, x):
        """Assembled Hessian, or None when the observation part is numeric-only."""
        if not self._has_analytic:
            return None
        return self._bound.hessian(x) - self._prec

    def hessian_at_pred_mean(self):
        """Cached assembled Hessian at the predictive mean (the warm start)."""
        return self._hess_at_pred_mean

    @property
    def hessian_increments(self) -> np.ndarray:
        """Per-coordinate increments for the numerical Hessian: a tenth of
        each predictive standard deviation."""
        return 0.1 * np.sqrt(np.diag(self._pred_cov))

    @property
    def has_analytic_hessian(self) -> bool:
        return self._has_analytic


def log_posterior_l(x, y, pred: GaussianBelief, obs: ObservationModel):
    """Value, gradient, and Hessian of l(x) = log p(y|x) + log N(x; pred).

    The Hessian entry is None when the observation model has no analytic
    Hessian. For repeated evaluation build a LogPosterior once instead.
    """
    lp = LogPosterior(y, pred, obs)
    x = np.asarray(x, dtype=float)
    return lp.value(x), lp.grad(x), lp.hessian(x)
