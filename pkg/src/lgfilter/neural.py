"""Neural-decoding model family.

Log-linear Poisson population observations, per-neuron GLM fitting, the
position-velocity state model, and the population vector decoder baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError
from .laplace import compute_gamma
from .model import LinearGaussianTransition, ObservationModel, Trajectory, symmetrized

__all__ = [
    "PoissonPopulation",
    "PoissonObservation",
    "PvaParams",
    "sample_population",
    "poisson_log_density",
    "fit_poisson_glm",
    "fit_sigma2",
    "build_pv_transition",
    "pva_decode",
    "pva_params_from_population",
]


@dataclass(frozen=True)
class PoissonPopulation:
    """Per-neuron log base rates, tuning directions, and the count-bin width.

    Neuron i fires with rate exp(alpha[i] + beta[i] . x) spikes per second,
    counted over bins of `delta` seconds.
    """

    alpha: np.ndarray
    beta: np.ndarray
    delta: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2 or alpha.shape != (beta.shape[0],):
            raise ValueError("alpha must be length N and beta shape (N, d)")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("population parameters must be finite")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_neurons(self) -> int:
        return self.beta.shape[0]

    @property
    def dim(self) -> int:
        return self.beta.shape[1]


def sample_population(N: int, d: int, seed) -> PoissonPopulation:
    """Draw a population: log base rates 2.5 + standard normal, tuning
    directions uniform on the unit sphere, 30 ms bins."""
    if N < 1 or d < 1:
        raise ValueError("N and d must be at least 1")
    rng = np.random.default_rng(seed)
    alpha = 2.5 + rng.standard_normal(N)
    beta = rng.standard_normal((N, d))
    beta /= np.linalg.norm(beta, axis=1, keepdims=True)
    return PoissonPopulation(alpha, beta, 0.03)


class PoissonObservation(ObservationModel):
    """Conditionally independent Poisson counts with log-linear rates."""

    def __init__(self, pop: PoissonPopulation):
        self.pop = pop

    @property
    def n_obs(self) -> int:
        return self.pop.n_neurons

    def _eta(self, x):
        return self.pop.alpha + self.pop.beta @ x

    def log_density(self, y, x) -> float:
        y = np.asarray(y, dtype=float)
        eta = self._eta(x)
        const = float(np.sum(y) * math.log(self.pop.delta) - gammaln(y + 1.0).sum())
        return float(y @ eta - self.pop.delta * np.exp(eta).sum()) + const

    def grad_log_density(self, y, x) -> np.ndarray:
        eta = self._eta(x)
        rates = self.pop.delta * np.exp(eta)
        return (np.asarray(y, dtype=float) - rates) @ self.pop.beta

    def hessian_log_density(self, y, x) -> np.ndarray:
        rates = self.pop.delta * np.exp(self._eta(x))
        return -(self.pop.beta.T * rates) @ self.pop.beta

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        intensity = self.pop.delta * np.exp(self._eta(x))
        return rng.poisson(intensity)

    def log_density_batch(self, y, states: np.ndarray) -> np.ndarray:
        # One (M, N) buffer, mutated in place: the M x N rate matrix dominates
        # the particle-filter cost at reference particle counts.
        y = np.asarray(y, dtype=float)
        eta = states @ self.pop.beta.T
        eta += self.pop.alpha
        out = eta @ y
        np.exp(eta, out=eta)
        out -= self.pop.delta * eta.sum(axis=1)
        const = float(np.sum(y) * math.log(self.pop.delta) - gammaln(y + 1.0).sum())
        out += const
        return out

    def bind(self, y):
        return _BoundPoisson(self.pop, y)

    def expansion_rate(self, w: np.ndarray) -> float:
        return compute_gamma(self.pop, w)


class _BoundPoisson:
    """Poisson log-density terms for one fixed count vector, with the
    count-only constants folded in once.

    Consecutive grad/hessian calls at the same point (the Newton pattern)
    reuse one expected-count vector via an identity-keyed memo.
    """

    def __init__(self, pop: PoissonPopulation, y):
        y = np.asarray(y, dtype=float)
        self._pop = pop
        self._y = y
        self._y_alpha = float(y @ pop.alpha)
        self._y_beta = y @ pop.beta
        self._const = float(np.sum(y) * math.log(pop.delta) - gammaln(y + 1.0).sum())
        self._last_x = None
        self._last_rates = None

    def _rates(self, x) -> np.ndarray:
        if x is self._last_x:
            return self._last_rates
        rates = self._pop.delta * np.exp(self._pop.alpha + self._pop.beta @ x)
        self._last_x, self._last_rates = x, rates
        return rates

    def value(self, x) -> float:
        return (self._y_alpha + float(self._y_beta @ x) + self._const
                - self._rates(x).sum())

    def grad(self, x) -> np.ndarray:
        return self._y_beta - self._rates(x) @ self._pop.beta

    def hessian(self, x) -> np.ndarray:
        return -(self._pop.beta.T * self._rates(x)) @ self._pop.beta


def poisson_log_density(y, x, pop: PoissonPopulation):
    """Value, gradient, and Hessian of the population log-density at x."""
    obs = PoissonObservation(pop)
    x = np.asarray(x, dtype=float)
    return obs.log_density(y, x), obs.grad_log_density(y, x), obs.hessian_log_density(y, x)


def _fit_poisson_newton(design: np.ndarray, counts: np.ndarray, offset: float,
                        grad_tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Maximum-likelihood coefficients of a Poisson regression with log link.

    Plain Newton with step halving; converged when the gradient norm drops
    below grad_tol. Raises on divergence (unbounded likelihood).
    """
    n, p = design.shape
    counts = np.asarray(counts, dtype=float)
    coef = np.zeros(p)
    coef[0] = math.log(max(counts.mean(), 0.25)) - offset
    eta = design @ coef + offset
    mu = np.exp(eta)
    loglik = float(counts @ eta - mu.sum())
    for _ in range(max_iter):
        grad = design.T @ (counts - mu)
        if np.linalg.norm(grad) < grad_tol:
            return coef
        info = design.T @ (mu[:, None] * design)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular information matrix") from None
        # Accept within float rounding slack: near the optimum the true
        # increase per step is below the evaluation noise of the likelihood.
        floor = loglik - 1e-10 * max(1.0, abs(loglik))
        scale = 1.0
        for _ in range(40):
            cand = coef + scale * step
            eta = design @ cand + offset
            if eta.max() < 500.0:
                mu = np.exp(eta)
                cand_loglik = float(counts @ eta - mu.sum())
                if cand_loglik >= floor:
                    break
            scale *= 0.5
        else:
            raise ConvergenceError("step halving failed (likelihood may be unbounded)")
        coef, loglik = cand, max(loglik, cand_loglik)
    raise ConvergenceError(f"no convergence in {max_iter} iterations")


def fit_poisson_glm(spikes: np.ndarray, states: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-neuron Poisson regression of counts on the state path.

    Uses a log link with the bin width as a fixed offset, so the recovered
    coefficients are directly comparable to a PoissonPopulation's alpha and
    beta. Returns (alpha (N,), beta (N, d)).
    """
    counts = np.asarray(spikes)
    if np.any(counts < 0):
        raise ValueError("spike counts must be non-negative")
    x = states.states
    t_len, d = x.shape
    if counts.ndim != 2 or counts.shape[0] != t_len:
        raise ValueError("spikes must be a (T, N) array aligned with the states")
    if t_len <= d + 1:
        raise ValueError(f"need more than {d + 1} time steps to fit {d + 1} coefficients")
    design = np.hstack([np.ones((t_len, 1)), x])
    if np.linalg.matrix_rank(design) < d + 1:
        raise ValueError("design matrix is rank deficient: state path does not identify beta")
    offset = math.log(states.dt)
    n_neurons = counts.shape[1]
    alpha = np.empty(n_neurons)
    beta = np.empty((n_neurons, d))
    for i in range(n_neurons):
        try:
            coef = _fit_poisson_newton(design, counts[:, i], offset)
        except ConvergenceError as exc:
            raise ConvergenceError(f"neuron {i}: {exc}") from exc
        alpha[i] = coef[0]
        beta[i] = coef[1:]
    return alpha, beta


def _split_position_velocity(states: np.ndarray) -> np.ndarray:
    if states.ndim != 2 or states.shape[1] % 2 != 0:
        raise ValueError("states must be (T, 2k) position-velocity concatenations")
    return states[:, states.shape[1] // 2:]


def fit_sigma2(states, dt: float) -> float:
    """Maximum-likelihood innovation variance of the velocity random walk.

    For states laid out as (position, velocity), the velocity increments are
    i.i.d. N(0, sigma^2 I), so the MLE is the mean squared increment
    component: sum_t ||v_t - v_{t-1}||^2 / (k (T-1)) with k the velocity
    dimension.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    arr = states.states if isinstance(states, Trajectory) else np.asarray(states, dtype=float)
    vel = _split_position_velocity(arr)
    if vel.shape[0] < 2:
        raise ValueError("need at least two time steps")
    innovations = np.diff(vel, axis=0)
    return float(np.sum(innovations**2) / innovations.size)


def build_pv_transition(sigma2: float, dt: float) -> LinearGaussianTransition:
    """Constant-velocity transition on a 6-dimensional (position, velocity)
    state: positions integrate velocity over dt, velocities take on white
    noise of variance sigma2. The noise covariance is PSD with rank 3."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    eye3 = np.eye(3)
    f = np.block([[eye3, dt * eye3], [np.zeros((3, 3)), eye3]])
    w = np.zeros((6, 6))
    w[3:, 3:] = sigma2 * eye3
    return LinearGaussianTransition(f, w)


@dataclass(frozen=True)
class PvaParams:
    """Cosine-tuning decoder parameters: preferred directions, baseline rates,
    and rate modulation depths (all rates in spikes per second)."""

    theta: np.ndarray
    r: np.ndarray
    Lambda: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        r = np.asarray(self.r, dtype=float)
        lam = np.asarray(self.Lambda, dtype=float)
        if theta.ndim != 2 or r.shape != (theta.shape[0],) or lam.shape != r.shape:
            raise ValueError("theta must be (N, d) with length-N r and Lambda")
        if np.any(lam <= 0):
            raise ValueError("Lambda must be positive elementwise")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "Lambda", lam)


def pva_params_from_population(pop: PoissonPopulation) -> PvaParams:
    """Decoder parameters matched to a log-linear population at x = 0:
    unit preferred directions along beta, baseline rate exp(alpha), and
    modulation depth exp(alpha) * ||beta||."""
    norms = np.linalg.norm(pop.beta, axis=1)
    if np.any(norms == 0):
        raise ValueError("tuning directions must be non-zero")
    theta = pop.beta / norms[:, None]
    baseline = np.exp(pop.alpha)
    return PvaParams(theta, baseline, baseline * norms)


def pva_decode(spikes: np.ndarray, pva: PvaParams, dt: float) -> Trajectory:
    """Population vector estimate at each step: preferred directions summed
    with weights (count/dt - baseline)/modulation. No temporal coupling."""
    counts = np.asarray(spikes, dtype=float)
    if counts.ndim != 2 or counts.shape[1] != pva.theta.shape[0]:
        raise ValueError("spikes must be (T, N) matching the decoder parameters")
    modulation = (counts / dt - pva.r) / pva.Lambda
    return Trajectory(modulation @ pva.theta, dt)
