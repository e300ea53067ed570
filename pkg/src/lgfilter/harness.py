"""Benchmark harness: seeded replicate orchestration and error metrics.

Builds the reference neural-decoding simulation (isotropic AR state process
observed through a log-linear Poisson population), runs the configured
methods against a replicate-averaged particle-filter reference, and
aggregates squared-error and timing summaries. Every run is a pure function
of (config, base seed): replicate seeds are spawned from a single seed
sequence and results are reduced in replicate-index order.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .laplace import compute_gamma
from .lgf import LgfConfig, lgf_filter
from .model import GaussianBelief, LinearGaussianTransition, StateSpaceModel, simulate
from .neural import (
    PoissonObservation,
    pva_decode,
    pva_params_from_population,
    sample_population,
)
from .pf import gold_standard, pf_filter

__all__ = [
    "ExperimentConfig",
    "MiseReport",
    "TimingReport",
    "PfScalingResult",
    "StabilityResult",
    "mise",
    "run_table1",
    "run_table2",
    "run_pf_scaling",
    "run_stability",
    "DESK_SCALE_PF_GRID",
]

DESK_SCALE_PF_GRID = (100, 300, 1000, 3000, 10000)

_PF_PATTERN = re.compile(r"^PF\((\d+)\)$")


def parse_method(name: str) -> tuple[str, int | None]:
    """Split a method label into (kind, particle count or order)."""
    if name == "LGF1":
        return ("lgf", 1)
    if name == "LGF2":
        return ("lgf", 2)
    if name == "PVA":
        return ("pva", None)
    if name == "NOOP":
        return ("noop", None)
    match = _PF_PATTERN.match(name)
    if match:
        m = int(match.group(1))
        if m < 1:
            raise ValueError(f"particle count must be positive in {name!r}")
        return ("pf", m)
    raise ValueError(f"unknown method {name!r}; expected LGF1, LGF2, PVA, NOOP, or PF(M)")


@dataclass(frozen=True)
class ExperimentConfig:
    """Simulation-study configuration.

    Defaults reproduce the 6-dimensional reference setup: state transition
    0.94 I with noise 0.019 I, 100 neurons, 30 steps of 30 ms. The reference
    posterior is averaged over `gold_standard` = (particles, replicates)
    independent particle-filter runs.
    """

    d: int = 6
    N: int = 100
    T: int = 30
    delta: float = 0.03
    F_scale: float = 0.94
    W_scale: float = 0.019
    replicates: int = 10
    base_seed: int = 20260801
    methods: tuple[str, ...] = ("LGF1", "LGF2", "PF(100)")
    gold_standard: tuple[int, int] = (100_000, 5)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if min(self.d, self.N, self.T) < 1:
            raise ValueError("d, N, and T must be at least 1")
        if not (self.delta > 0 and self.W_scale > 0):
            raise ValueError("delta and W_scale must be positive")
        object.__setattr__(self, "methods", tuple(self.methods))
        for name in self.methods:
            parse_method(name)
        m, r = self.gold_standard
        if m < 1 or r < 1:
            raise ValueError("gold_standard must be (particles >= 1, replicates >= 1)")
        object.__setattr__(self, "gold_standard", (int(m), int(r)))


@dataclass(frozen=True)
class MiseReport:
    """Per-method mean integrated squared errors and their replicate SEs.

    `mise_vs_gold` measures approximation error against the replicate-
    averaged reference posterior mean; `mise_vs_truth` measures statistical
    error against the simulated states. `posterior_mise` is the reference
    itself against the truth. `gold_noise_floor` is the mean squared
    between-replicate standard error of the reference; the report is flagged
    unreliable when that floor is not below 10% of the smallest method MISE.
    """

    methods: tuple[str, ...]
    mise_vs_gold: dict[str, float]
    mise_vs_gold_se: dict[str, float]
    mise_vs_truth: dict[str, float]
    mise_vs_truth_se: dict[str, float]
    seconds: dict[str, float]
    posterior_mise: float
    posterior_mise_se: float
    gold_noise_floor: float
    gold_reliable: bool


@dataclass(frozen=True)
class TimingReport:
    """Mean wall-clock seconds per method with replicate standard errors."""

    methods: tuple[str, ...]
    seconds: dict[str, float]
    seconds_se: dict[str, float]


@dataclass(frozen=True)
class PfScalingResult:
    """Particle-filter error as a function of the particle count, with the
    two filter reference errors measured on the same replicates."""

    particle_grid: tuple[int, ...]
    mise: tuple[float, ...]
    se: tuple[float, ...]
    lgf1_mise: float
    lgf2_mise: float
    gold_noise_floor: float

    def crossing_particles(self) -> int | None:
        """Smallest grid size whose error beats the first-order filter."""
        for m, value in zip(self.particle_grid, self.mise):
            if value < self.lgf1_mise:
                return m
        return None

    def loglog_slope(self, subset: tuple[int, ...] | None = None) -> float:
        grid = np.array(self.particle_grid, dtype=float)
        vals = np.array(self.mise, dtype=float)
        if subset is not None:
            keep = np.isin(grid, np.asarray(subset, dtype=float))
            grid, vals = grid[keep], vals[keep]
        slope, _ = np.polyfit(np.log(grid), np.log(vals), 1)
        return float(slope)


@dataclass(frozen=True)
class StabilityResult:
    """Filtered-mean trajectories from perturbed initial beliefs on one
    shared dataset, plus the pairwise-spread sequence."""

    initial_means: tuple[np.ndarray, ...]
    trajectories: tuple[np.ndarray, ...]
    spread: np.ndarray
    true_states: np.ndarray

    def contraction_ratio(self) -> float:
        return float(self.spread[-1] / self.spread[0])


def mise(estimates: np.ndarray, reference: np.ndarray) -> float:
    """Mean squared error per time step and per coordinate."""
    estimates = np.asarray(estimates, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimates.shape != reference.shape:
        raise ValueError(f"shape mismatch: {estimates.shape} vs {reference.shape}")
    return float(np.mean((estimates - reference) ** 2))


@dataclass(frozen=True)
class _Replicate:
    model: StateSpaceModel
    pop: object
    x0: np.ndarray
    true_states: np.ndarray
    spikes: np.ndarray
    init: GaussianBelief
    gamma: float
    mc_seed: np.random.SeedSequence


def _build_replicate(cfg: ExperimentConfig, seed_seq: np.random.SeedSequence) -> _Replicate:
    pop_ss, x0_ss, traj_ss, mc_ss = seed_seq.spawn(4)
    pop = sample_population(cfg.N, cfg.d, pop_ss)
    if pop.delta != cfg.delta:
        pop = replace(pop, delta=cfg.delta)
    trans = LinearGaussianTransition(cfg.F_scale * np.eye(cfg.d), cfg.W_scale * np.eye(cfg.d))
    model = StateSpaceModel(trans, PoissonObservation(pop), dt=cfg.delta)
    stationary_sd = np.sqrt(cfg.W_scale / (1.0 - cfg.F_scale**2))
    x0 = stationary_sd * np.random.default_rng(x0_ss).standard_normal(cfg.d)
    traj, spikes = simulate(model, cfg.T, x0, traj_ss)
    init = GaussianBelief(x0, trans.W)
    gamma = compute_gamma(pop, trans.W)
    return _Replicate(model, pop, x0, traj.states, spikes, init, gamma, mc_ss)


def _run_method(name: str, data: _Replicate, stream) -> tuple[np.ndarray, float]:
    """Run one method on a replicate; returns (mean trajectory, seconds)."""
    kind, arg = parse_method(name)
    started = time.perf_counter()
    if kind == "lgf":
        cfg = LgfConfig.for_order(arg)
        out = lgf_filter(data.model, data.spikes, data.init, cfg, gamma=data.gamma)
        means = out.means
    elif kind == "pf":
        out = pf_filter(data.model, data.spikes, arg, data.init, stream)
        means = out.means
    elif kind == "pva":
        params = pva_params_from_population(data.pop)
        means = pva_decode(data.spikes, params, data.pop.delta).states
    else:
        means = np.zeros_like(data.true_states)
    return means, time.perf_counter() - started


def _needs_stream(name: str) -> bool:
    return parse_method(name)[0] == "pf"


def _mean_and_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def run_table1(cfg: ExperimentConfig) -> MiseReport:
    """Approximation and statistical error of every configured method.

    Per replicate: simulate, build the replicate-averaged reference, run each
    method, and score it against the reference (approximation error) and
    against the true states (statistical error). Aggregates are means over
    replicates with between-replicate standard errors.
    """
    m_gold, r_gold = cfg.gold_standard
    per_gold: dict[str, list[float]] = {m: [] for m in cfg.methods}
    per_truth: dict[str, list[float]] = {m: [] for m in cfg.methods}
    per_secs: dict[str, list[float]] = {m: [] for m in cfg.methods}
    posterior: list[float] = []
    floors: list[float] = []
    for seed_seq in np.random.SeedSequence(cfg.base_seed).spawn(cfg.replicates):
        data = _build_replicate(cfg, seed_seq)
        n_pf = sum(_needs_stream(m) for m in cfg.methods)
        streams = data.mc_seed.spawn(r_gold + n_pf)
        reference, ref_se = gold_standard(
            data.model, data.spikes, m_gold, r_gold, streams[:r_gold], data.init
        )
        floors.append(float(np.nanmean(ref_se**2)))
        posterior.append(mise(reference, data.true_states))
        pf_streams = iter(streams[r_gold:])
        for name in cfg.methods:
            stream = next(pf_streams) if _needs_stream(name) else None
            means, seconds = _run_method(name, data, stream)
            per_gold[name].append(mise(means, reference))
            per_truth[name].append(mise(means, data.true_states))
            per_secs[name].append(seconds)
    gold_mean = {m: _mean_and_se(v)[0] for m, v in per_gold.items()}
    gold_se = {m: _mean_and_se(v)[1] for m, v in per_gold.items()}
    truth_mean = {m: _mean_and_se(v)[0] for m, v in per_truth.items()}
    truth_se = {m: _mean_and_se(v)[1] for m, v in per_truth.items()}
    secs_mean = {m: float(np.mean(v)) for m, v in per_secs.items()}
    post_mean, post_se = _mean_and_se(posterior)
    floor = float(np.mean(floors))
    reliable = bool(floor < 0.1 * min(gold_mean.values())) if gold_mean else True
    return MiseReport(
        methods=cfg.methods,
        mise_vs_gold=gold_mean,
        mise_vs_gold_se=gold_se,
        mise_vs_truth=truth_mean,
        mise_vs_truth_se=truth_se,
        seconds=secs_mean,
        posterior_mise=post_mean,
        posterior_mise_se=post_se,
        gold_noise_floor=floor,
        gold_reliable=reliable,
    )


def run_table2(cfg: ExperimentConfig) -> TimingReport:
    """Mean wall-clock seconds per method over replicates.

    Asserts nothing about absolute times; relative orderings are checked by
    the acceptance suite because absolute values are hardware-bound.
    """
    per_secs: dict[str, list[float]] = {m: [] for m in cfg.methods}
    for seed_seq in np.random.SeedSequence(cfg.base_seed).spawn(cfg.replicates):
        data = _build_replicate(cfg, seed_seq)
        n_pf = sum(_needs_stream(m) for m in cfg.methods)
        pf_streams = iter(data.mc_seed.spawn(n_pf))
        for name in cfg.methods:
            stream = next(pf_streams) if _needs_stream(name) else None
            _, seconds = _run_method(name, data, stream)
            per_secs[name].append(seconds)
    means = {m: _mean_and_se(v)[0] for m, v in per_secs.items()}
    ses = {m: _mean_and_se(v)[1] for m, v in per_secs.items()}
    return TimingReport(cfg.methods, means, ses)


def run_pf_scaling(cfg: ExperimentConfig,
                   particle_grid: tuple[int, ...] = DESK_SCALE_PF_GRID) -> PfScalingResult:
    """Particle-filter MISE as a function of the particle count, with the
    two filter errors measured on the same replicates as references."""
    particle_grid = tuple(int(m) for m in particle_grid)
    if any(m < 1 for m in particle_grid):
        raise ValueError("particle counts must be positive")
    m_gold, r_gold = cfg.gold_standard
    per_m: dict[int, list[float]] = {m: [] for m in particle_grid}
    lgf1: list[float] = []
    lgf2: list[float] = []
    floors: list[float] = []
    for seed_seq in np.random.SeedSequence(cfg.base_seed).spawn(cfg.replicates):
        data = _build_replicate(cfg, seed_seq)
        streams = data.mc_seed.spawn(r_gold + len(particle_grid))
        reference, ref_se = gold_standard(
            data.model, data.spikes, m_gold, r_gold, streams[:r_gold], data.init
        )
        floors.append(float(np.nanmean(ref_se**2)))
        means, _ = _run_method("LGF1", data, None)
        lgf1.append(mise(means, reference))
        means, _ = _run_method("LGF2", data, None)
        lgf2.append(mise(means, reference))
        for m, stream in zip(particle_grid, streams[r_gold:]):
            out = pf_filter(data.model, data.spikes, m, data.init, stream)
            per_m[m].append(mise(out.means, reference))
    stats = [_mean_and_se(per_m[m]) for m in particle_grid]
    return PfScalingResult(
        particle_grid=particle_grid,
        mise=tuple(s[0] for s in stats),
        se=tuple(s[1] for s in stats),
        lgf1_mise=float(np.mean(lgf1)),
        lgf2_mise=float(np.mean(lgf2)),
        gold_noise_floor=float(np.mean(floors)),
    )


def default_stability_offsets(d: int) -> list[np.ndarray]:
    """Five distinct all-plus/minus-one perturbation patterns."""
    alternating = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(d)])
    half = np.array([1.0 if i < d // 2 else -1.0 for i in range(d)])
    return [np.ones(d), -np.ones(d), alternating, -alternating, half]


def run_stability(cfg: ExperimentConfig, inits=None) -> StabilityResult:
    """Filter one shared dataset from several initial means and track how the
    filtered-mean trajectories converge toward each other."""
    seed_seq = np.random.SeedSequence(cfg.base_seed).spawn(1)[0]
    data = _build_replicate(cfg, seed_seq)
    if inits is None:
        inits = [data.x0 + off for off in default_stability_offsets(cfg.d)]
    inits = [np.asarray(v, dtype=float) for v in inits]
    lgf_cfg = LgfConfig.for_order(1)
    trajectories = []
    for mean0 in inits:
        init = GaussianBelief(mean0, data.model.transition.W)
        out = lgf_filter(data.model, data.spikes, init, lgf_cfg, gamma=data.gamma)
        trajectories.append(out.means)
    stacked = np.array(trajectories)
    n_init = len(inits)
    spread = np.zeros(cfg.T)
    for t in range(cfg.T):
        best = 0.0
        for i in range(n_init):
            for j in range(i + 1, n_init):
                best = max(best, float(np.linalg.norm(stacked[i, t] - stacked[j, t])))
        spread[t] = best
    return StabilityResult(
        initial_means=tuple(inits),
        trajectories=tuple(trajectories),
        spread=spread,
        true_states=data.true_states,
    )
