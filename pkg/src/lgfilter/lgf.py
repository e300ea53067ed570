"""The Laplace-Gaussian filter and its backward smoother.

Each step predicts through the linear-Gaussian transition, approximates the
posterior mean and variance by Laplace's method at the configured order, and
replaces the filtered distribution with a Gaussian carrying that mean and
variance. Smoothing runs the closed-form backward recursion over the stored
Gaussian beliefs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .laplace import (
    LaplaceOrder,
    NewtonConfig,
    RichardsonConfig,
    _first_order,
    choose_offset_c,
    laplace_second_mean,
)
from .model import (
    GaussianBelief,
    LinearGaussianTransition,
    LogPosterior,
    ObservationModel,
    StateSpaceModel,
    _belief_from_symmetric,
    predict,
    symmetrized,
)

__all__ = ["LgfConfig", "FilterOutput", "SmoothOutput", "lgf_step", "lgf_filter", "lgf_smooth"]


@dataclass(frozen=True)
class LgfConfig:
    """Filter tunables: approximation order, Newton and extrapolation settings.

    The Newton stopping exponent must match the approximation order.
    """

    order: LaplaceOrder = LaplaceOrder.First
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    richardson: RichardsonConfig = field(default_factory=RichardsonConfig)
    use_analytic_obs_hessian: bool = True

    def __post_init__(self):
        if self.newton.alpha != self.order.value:
            raise ValueError(
                f"newton.alpha ({self.newton.alpha}) must equal the approximation "
                f"order ({self.order.value})"
            )

    @classmethod
    def for_order(cls, order: int | LaplaceOrder, **kwargs) -> "LgfConfig":
        order = LaplaceOrder(order) if not isinstance(order, LaplaceOrder) else order
        newton = kwargs.pop("newton", NewtonConfig(alpha=order.value))
        return cls(order=order, newton=newton, **kwargs)


@dataclass(frozen=True)
class FilterOutput:
    """Per-step predictive and filtered beliefs plus run diagnostics."""

    predictive: tuple[GaussianBelief, ...]
    filtered: tuple[GaussianBelief, ...]
    newton_iterations: tuple[int, ...]
    step_seconds: tuple[float, ...]

    def __post_init__(self):
        n = len(self.filtered)
        if not (len(self.predictive) == len(self.newton_iterations) == len(self.step_seconds) == n):
            raise ValueError("all per-step sequences must have equal length")

    @property
    def steps(self) -> int:
        return len(self.filtered)

    @property
    def means(self) -> np.ndarray:
        return np.array([b.mean for b in self.filtered])

    @property
    def covariances(self) -> np.ndarray:
        return np.array([b.cov for b in self.filtered])

    @property
    def predictive_means(self) -> np.ndarray:
        return np.array([b.mean for b in self.predictive])


@dataclass(frozen=True)
class SmoothOutput:
    """Backward-pass beliefs; the last entry equals the last filtered belief."""

    smoothed: tuple[GaussianBelief, ...]

    @property
    def steps(self) -> int:
        return len(self.smoothed)

    @property
    def means(self) -> np.ndarray:
        return np.array([b.mean for b in self.smoothed])

    @property
    def covariances(self) -> np.ndarray:
        return np.array([b.cov for b in self.smoothed])


def _update(pred: GaussianBelief, y, obs: ObservationModel, gamma: float,
            cfg: LgfConfig) -> tuple[GaussianBelief, int]:
    """One measurement update; returns the filtered belief and the Newton
    iteration count for the primary maximization."""
    lp = LogPosterior(y, pred, obs, use_analytic_obs_hessian=cfg.use_analytic_obs_hessian)
    mode, h_at_mode, iters = _first_order(lp, pred.mean, gamma, cfg.newton, cfg.richardson)
    cov = symmetrized(np.linalg.inv(-h_at_mode))
    if cfg.order is LaplaceOrder.First:
        return _belief_from_symmetric(mode, cov), iters
    mean = np.empty(pred.dim)
    for i in range(pred.dim):
        offset = choose_offset_c(pred, i)
        mean[i] = laplace_second_mean(
            lp, i, offset, mode, gamma, cfg.newton, cfg.richardson, mode_hessian=h_at_mode
        )
    return _belief_from_symmetric(mean, cov), iters


def lgf_step(pred: GaussianBelief, y, obs: ObservationModel, gamma: float,
             cfg: LgfConfig = LgfConfig()) -> GaussianBelief:
    """Filtered Gaussian belief for one observation given the predictive belief."""
    belief, _ = _update(pred, y, obs, gamma, cfg)
    return belief


def _resolve_gamma(model: StateSpaceModel, gamma) -> float:
    if gamma is not None:
        return float(gamma)
    rate = model.observation.expansion_rate(model.transition.W)
    if rate is None:
        raise ValueError(
            "no expansion rate available: pass gamma explicitly for this observation model"
        )
    return float(rate)


def lgf_filter(model: StateSpaceModel, observations, init: GaussianBelief,
               cfg: LgfConfig = LgfConfig(), gamma: float | None = None) -> FilterOutput:
    """Run the filter over an observation sequence.

    `init` is the belief about the state before the first observation's
    transition; each step applies the analytic prediction and then the
    Laplace measurement update. The run is fully deterministic. When `gamma`
    is omitted the observation model must supply its concentration scale.
    """
    observations = np.asarray(observations)
    if len(observations) < 1:
        raise ValueError("need at least one observation")
    gamma = _resolve_gamma(model, gamma)
    preds: list[GaussianBelief] = []
    filts: list[GaussianBelief] = []
    iters: list[int] = []
    secs: list[float] = []
    current = init
    for t, y in enumerate(observations):
        started = time.perf_counter()
        try:
            pred = predict(current, model.transition)
            filtered, n_iter = _update(pred, y, model.observation, gamma, cfg)
        except Exception as exc:
            exc.args = (f"time step {t + 1}: {exc}",)
            raise
        secs.append(time.perf_counter() - started)
        preds.append(pred)
        filts.append(filtered)
        iters.append(n_iter)
        current = filtered
    return FilterOutput(tuple(preds), tuple(filts), tuple(iters), tuple(secs))


def lgf_smooth(fo: FilterOutput, trans: LinearGaussianTransition) -> SmoothOutput:
    """Fixed-interval smoothing over a filter run.

    With Gaussian filtered/predictive beliefs and a linear-Gaussian
    transition the backward recursion is closed-form: gain
    G_t = V_{t|t} F^T V_{t+1|t}^{-1}, then the usual mean and covariance
    corrections against the stored predictive beliefs.
    """
    n = fo.steps
    smoothed: list[GaussianBelief | None] = [None] * n
    smoothed[n - 1] = fo.filtered[n - 1]
    f_mat = trans.F
    for t in range(n - 2, -1, -1):
        filt = fo.filtered[t]
        pred_next = fo.predictive[t + 1]
        try:
            gain = np.linalg.solve(pred_next.cov, f_mat @ filt.cov).T
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                f"time step {t + 2}: predictive covariance is singular"
            ) from None
        nxt = smoothed[t + 1]
        mean = filt.mean + gain @ (nxt.mean - pred_next.mean)
        cov = symmetrized(filt.cov + gain @ (nxt.cov - pred_next.cov) @ gain.T)
        smoothed[t] = _belief_from_symmetric(mean, cov)
    return SmoothOutput(tuple(smoothed))
