"""Laplace approximations of posterior means and variances.

Contains the numerical second-derivative machinery (iterated central
differences with Richardson extrapolation, and its multi-dimensional Hessian
reduction), a safeguarded Newton maximizer with a concentration-scaled
stopping rule, the first- and second-order posterior approximations, the
expansion-rate identification for the Poisson population model, and the
partial ordinary Bell polynomial recursion used as a series-coefficient
oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .model import GaussianBelief, LogPosterior, symmetrized

__all__ = [
    "RichardsonConfig",
    "NewtonConfig",
    "LaplaceOrder",
    "richardson_d2",
    "numeric_hessian",
    "newton_maximize",
    "laplace_first",
    "laplace_second_mean",
    "choose_offset_c",
    "compute_gamma",
    "bell_coefficients",
    "fd_hessian_from_grad",
]


@dataclass(frozen=True)
class RichardsonConfig:
    """Controls the extrapolated central-difference second derivative.

    h0 is the initial increment, shrunk by the factor c at each level; the
    extrapolation stops once successive same-column approximations agree to
    rel_tol in relative terms.
    """

    h0: float = 0.5
    c: float = 2.0
    rel_tol: float = 1e-9
    max_levels: int = 25

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_levels < 2:
            raise ValueError("max_levels must be at least 2")


@dataclass(frozen=True)
class NewtonConfig:
    """Newton maximization tunables.

    The iteration stops when the realized step length drops below
    c_stop * gamma**(-alpha), where gamma is the posterior concentration
    scale supplied by the caller and alpha is the approximation order.
    """

    c_stop: float = 1.0
    alpha: int = 1
    max_iter: int = 100
    step_halving_limit: int = 30

    def __post_init__(self):
        if not self.c_stop > 0:
            raise ValueError("c_stop must be positive")
        if self.alpha not in (1, 2):
            raise ValueError("alpha must be 1 or 2")
        if self.max_iter < 1 or self.step_halving_limit < 0:
            raise ValueError("max_iter must be >= 1 and step_halving_limit >= 0")


class LaplaceOrder(enum.Enum):
    """Order of the posterior-mean approximation."""

    First = 1
    Second = 2


def richardson_d2(f, x0: float, cfg: RichardsonConfig = RichardsonConfig()) -> float:
    """Second derivative of a scalar function at x0.

    Builds second central difference quotients at increments h0 * c**(-n) and
    extrapolates each row against the previous one; the level-k update divides
    the difference by c**(2k) - 1, eliminating the h**(2k) error term so that
    the k-th column is accurate to O(h**(2(k+1))). Returns the entry one
    column beyond the first pair of same-column values that agree to rel_tol.
    """
    fx0 = f(x0)
    table: dict[tuple[int, int], float] = {}
    for n in range(cfg.max_levels):
        h = cfg.h0 * cfg.c ** (-n)
        table[(n, 0)] = (f(x0 + h) + f(x0 - h) - 2.0 * fx0) / h**2
        for k in range(1, n + 1):
            prev, prev_up = table[(n, k - 1)], table[(n - 1, k - 1)]
            table[(n, k)] = prev + (prev - prev_up) / (cfg.c ** (2 * k) - 1.0)
        if n >= 1:
            for k in range(n):
                if abs(table[(n, k)] - table[(n - 1, k)]) <= cfg.rel_tol * abs(table[(n, k)]):
                    return table[(n, k + 1)]
    raise ConvergenceError(
        f"second-derivative extrapolation did not converge in {cfg.max_levels} levels "
        "(function too noisy or h0 ill-chosen)"
    )


def numeric_hessian(f, xhat, h, cfg: RichardsonConfig = RichardsonConfig()) -> np.ndarray:
    """Hessian of a scalar function at a local maximum, by 1-D slices.

    Diagonal entries come from extrapolated second differences along each
    axis. Off-diagonal entries come from a two-coordinate slice in which each
    coordinate is scaled by the reciprocal square root of the magnitude of
    its (negative) diagonal entry; for the negated function that slice has
    second derivative 2 + 2*a_ij/sqrt(a_ii*a_jj), so the cross term of the
    negated Hessian is (f''(0)/2 - 1)*sqrt(a_ii*a_jj) and the sign is
    restored on output. Raises when a diagonal second derivative is
    non-negative, since that contradicts xhat being a maximum.
    """
    xhat = np.asarray(xhat, dtype=float)
    d = xhat.size
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,))
    if np.any(h <= 0):
        raise ValueError("increments must be strictly positive")
    hess = np.zeros((d, d))

    def axis_slice(i):
        def g(s):
            x = xhat.copy()
            x[i] += s
            return f(x)
        return g

    for i in range(d):
        cfg_i = RichardsonConfig(h[i], cfg.c, cfg.rel_tol, cfg.max_levels)
        dii = richardson_d2(axis_slice(i), 0.0, cfg_i)
        if dii >= 0:
            raise ValueError(
                f"non-negative second derivative along coordinate {i}; "
                "the evaluation point is not a local maximum"
            )
        hess[i, i] = dii

    def pair_slice(i, j, scale_i, scale_j):
        def g(s):
            x = xhat.copy()
            x[i] += s * scale_i
            x[j] += s * scale_j
            return -f(x)
        return g

    for i in range(d):
        for j in range(i + 1, d):
            scale_i = 1.0 / math.sqrt(-hess[i, i])
            scale_j = 1.0 / math.sqrt(-hess[j, j])
            h0 = 0.5 * (h[i] / scale_i + h[j] / scale_j)
            cfg_ij = RichardsonConfig(h0, cfg.c, cfg.rel_tol, cfg.max_levels)
            d2 = richardson_d2(pair_slice(i, j, scale_i, scale_j), 0.0, cfg_ij)
            a_ij = (d2 / 2.0 - 1.0) * math.sqrt(hess[i, i] * hess[j, j])
            hess[i, j] = hess[j, i] = -a_ij
    return symmetrized(hess)


def fd_hessian_from_grad(grad, eps: float = 1e-6):
    """Hessian callable built from central differences of a gradient.

    Used as the Newton-step curvature when an observation model exposes a
    gradient but no analytic Hessian; the slice-based `numeric_hessian` is
    still used for final at-the-mode curvatures.
    """

    def hess(x):
        x = np.asarray(x, dtype=float)
        d = x.size
        out = np.empty((d, d))
        for i in range(d):
            step = eps * max(1.0, abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += step
            xm[i] -= step
            out[:, i] = (grad(xp) - grad(xm)) / (2.0 * step)
        return symmetrized(out)

    return hess


def newton_maximize(f, grad, hess, x_start, gamma: float,
                    cfg: NewtonConfig = NewtonConfig(), *, initial_hessian=None):
    """Maximize f by safeguarded Newton iteration.

    Stops once the realized step length falls below c_stop * gamma**(-alpha).
    A step that fails to increase f is halved up to step_halving_limit times.
    Returns (maximizer, hessian at the maximizer, number of full iterations
    completed before the terminating step). `initial_hessian`, when given,
    must equal hess(x_start) and saves one evaluation.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    tol = cfg.c_stop * gamma ** (-cfg.alpha)
    x = np.asarray(x_start, dtype=float)  # never mutated; iterates are fresh arrays
    fx = f(x)
    if not np.isfinite(fx):
        raise ValueError("objective is not finite at the starting point")
    h = hess(x) if initial_hessian is None else initial_hessian
    for it in range(cfg.max_iter + 1):
        g = grad(x)
        try:
            step = np.linalg.solve(-h, g)
        except np.linalg.LinAlgError:
            raise ConvergenceError("Hessian is not invertible") from None
        if math.sqrt(float(step @ step)) < tol:
            # Terminating increment: take it and report the curvature there.
            x = x + step
            return x, hess(x), it
        if it == cfg.max_iter:
            break
        scale = 1.0
        for _ in range(cfg.step_halving_limit + 1):
            x_new = x + scale * step
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new >= fx:
                break
            scale *= 0.5
        else:
            raise ConvergenceError("step halving failed to produce an increase in the objective")
        x, fx = x_new, f_new
        h = hess(x)
    raise ConvergenceError(f"Newton iteration did not converge within {cfg.max_iter} iterations")


def _mode_hessian(lp: LogPosterior, x: np.ndarray, richardson: RichardsonConfig) -> np.ndarray:
    """Hessian of the log posterior at a maximizer: analytic when available,
    else the slice-based numerical routine with the default increments."""
    h = lp.hessian(x)
    if h is not None:
        return h
    return numeric_hessian(lp.value, x, lp.hessian_increments, richardson)


def _newton_hessian_callable(lp: LogPosterior):
    if lp.has_analytic_hessian:
        return lp.hessian
    return fd_hessian_from_grad(lp.grad)


def _first_order(lp: LogPosterior, start, gamma, newton: NewtonConfig,
                 richardson: RichardsonConfig):
    """Shared first-order machinery: (mode, Hessian at mode, Newton iterations)."""
    hess = _newton_hessian_callable(lp)
    initial = lp.hessian_at_pred_mean() if start is lp.pred_mean else None
    mode, h_at_mode, iters = newton_maximize(lp.value, lp.grad, hess, start, gamma, newton,
                                             initial_hessian=initial)
    if not lp.has_analytic_hessian:
        h_at_mode = numeric_hessian(lp.value, mode, lp.hessian_increments, richardson)
    return mode, h_at_mode, iters


def laplace_first(lp: LogPosterior, start, gamma: float,
                  newton: NewtonConfig = NewtonConfig(),
                  richardson: RichardsonConfig = RichardsonConfig()) -> GaussianBelief:
    """First-order approximation: mean at the mode of the log posterior,
    covariance the inverse negative Hessian there."""
    mode, h_at_mode, _ = _first_order(lp, start, gamma, newton, richardson)
    cov = symmetrized(np.linalg.inv(-h_at_mode))
    return GaussianBelief(mode, cov)


def laplace_second_mean(lp: LogPosterior, coord: int, offset_c: float,
                        first_order_mode, gamma: float,
                        newton: NewtonConfig,
                        richardson: RichardsonConfig = RichardsonConfig(),
                        *, mode_hessian=None) -> float:
    """Second-order posterior mean of one state coordinate.

    Applies the ratio-of-peaks construction to g(x) = x[coord] + offset_c: the
    augmented objective k(x) = log g(x) + l(x) is maximized by Newton warm-
    started at the mode of l, and the expectation is the ratio of
    |det(-k'')|**(-1/2) * exp(k) at the k-mode to the same expression for l at
    its mode, evaluated in log space. The offset is subtracted before
    returning.
    """
    mode = np.asarray(first_order_mode, dtype=float)
    if mode_hessian is None:
        mode_hessian = _mode_hessian(lp, mode, richardson)
    l_at_mode = lp.value(mode)
    sign_l, logdet_l = np.linalg.slogdet(-mode_hessian)
    if sign_l <= 0:
        raise ValueError("negated Hessian of the log posterior is not positive definite at the mode")

    coord_vec = np.zeros(mode.size)
    coord_vec[coord] = 1.0

    def k_value(x):
        g = x[coord] + offset_c
        if g <= 0:
            return -np.inf
        return math.log(g) + lp.value(x)

    def k_grad(x):
        return lp.grad(x) + coord_vec / (x[coord] + offset_c)

    base_hess = _newton_hessian_callable(lp)

    def k_hess(x):
        h = np.array(base_hess(x))
        h[coord, coord] -= 1.0 / (x[coord] + offset_c) ** 2
        return h

    k_mode, k_hess_at_mode, _ = newton_maximize(k_value, k_grad, k_hess, mode, gamma, newton)
    if k_mode[coord] + offset_c <= 0:
        raise ValueError(f"offset {offset_c} too small: g is non-positive at the k-mode")
    if not lp.has_analytic_hessian:
        k_hess_at_mode = numeric_hessian(lp.value, k_mode, lp.hessian_increments, richardson)
        k_hess_at_mode[coord, coord] -= 1.0 / (k_mode[coord] + offset_c) ** 2
    sign_k, logdet_k = np.linalg.slogdet(-k_hess_at_mode)
    if sign_k <= 0:
        raise ValueError("negated Hessian of the augmented objective is not positive definite")
    log_ratio = (k_value(k_mode) - l_at_mode) + 0.5 * (logdet_l - logdet_k)
    return math.exp(log_ratio) - offset_c


def choose_offset_c(pred: GaussianBelief, coord: int) -> float:
    """Positivity offset for one coordinate: |m_i| + 10 predictive standard
    deviations, so x[coord] + c > 0 throughout the bulk of the posterior."""
    return abs(float(pred.mean[coord])) + 10.0 * math.sqrt(float(pred.cov[coord, coord]))


def compute_gamma(pop, W: np.ndarray) -> float:
    """Posterior concentration scale for the log-linear Poisson population.

    delta * sum_i exp(alpha_i) * ||beta_i||^2 plus the spectral norm of the
    inverse process-noise covariance.
    """
    w = np.asarray(W, dtype=float)
    vals = np.linalg.eigvalsh(w)
    if vals.min() <= 0:
        raise np.linalg.LinAlgError("W is singular or not positive definite")
    w_term = 1.0 / vals.min()
    alpha = np.asarray(pop.alpha, dtype=float)
    beta = np.asarray(pop.beta, dtype=float)
    if alpha.size == 0:
        return w_term
    obs_term = float(pop.delta * np.sum(np.exp(alpha) * np.sum(beta**2, axis=1)))
    return obs_term + w_term


def bell_coefficients(A, i: int, j: int) -> float:
    """Coefficient of x**i in (A1*x + A2*x**2 + ...)**j.

    Computed by the triangular recursion
    C[i, j] = sum_{m=j-1}^{i-1} A[i-m] * C[m, j-1], with C[0, 0] = 1 and
    C[i, 0] = C[0, j] = 0 for i, j > 0.
    """
    if i < 0 or j < 0:
        raise ValueError("indices must be non-negative")
    coeffs = np.asarray(A, dtype=float)
    if i > 0 and j > 0 and coeffs.size < i:
        raise ValueError(f"need coefficients A1..A{i}, got {coeffs.size}")
    table = np.zeros((i + 1, j + 1))
    table[0, 0] = 1.0
    for jj in range(1, j + 1):
        for ii in range(1, i + 1):
            acc = 0.0
            for m in range(jj - 1, ii):
                acc += coeffs[ii - m - 1] * table[m, jj - 1]
            table[ii, jj] = acc
    return float(table[i, j])
