"""CSV and JSON artifact formats.

State/observation tables are plain CSV with a step-index column and
full-precision decimal values. Populations, configurations, and run manifests
are JSON. Every harness output directory carries a manifest recording the
config hash, base seed, and library versions so runs can be reproduced
bit-for-bit.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .harness import ExperimentConfig, MiseReport, PfScalingResult, StabilityResult, TimingReport
from .lgf import FilterOutput, SmoothOutput
from .model import Trajectory
from .neural import PoissonPopulation

__all__ = [
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_observations_csv",
    "read_observations_csv",
    "write_beliefs_csv",
    "read_beliefs_csv",
    "write_population_json",
    "read_population_json",
    "load_config",
    "save_config",
    "config_hash",
    "write_manifest",
    "write_mise_report_csv",
    "write_timing_csv",
    "write_pf_scaling_csv",
    "write_stability_csv",
]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Rows t, x1..xd for t = 1..T at full precision."""
    states = traj.states
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(states.shape[1])])
        for t, row in enumerate(states, start=1):
            writer.writerow([t] + [_fmt(v) for v in row])


def read_trajectory_csv(path, dt: float) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 1:], dt)


def write_observations_csv(path, observations: np.ndarray) -> None:
    """Rows t, y1..yN; counts are written as integers."""
    obs = np.asarray(observations)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"y{i + 1}" for i in range(obs.shape[1])])
        integral = np.issubdtype(obs.dtype, np.integer)
        for t, row in enumerate(obs, start=1):
            writer.writerow([t] + [int(v) if integral else _fmt(v) for v in row])


def read_observations_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    body = data[:, 1:]
    if np.allclose(body, np.round(body)):
        return body.astype(np.int64)
    return body


def _belief_header(d: int) -> list[str]:
    cols = ["t"] + [f"m{i + 1}" for i in range(d)]
    for i in range(d):
        for j in range(i, d):
            cols.append(f"V{i + 1}{j + 1}")
    return cols


def write_beliefs_csv(path, output: FilterOutput | SmoothOutput) -> None:
    """Rows t, m1..md, then the row-major upper triangle of the covariance."""
    beliefs = output.filtered if isinstance(output, FilterOutput) else output.smoothed
    d = beliefs[0].dim
    upper = np.triu_indices(d)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_belief_header(d))
        for t, belief in enumerate(beliefs, start=1):
            row = [t] + [_fmt(v) for v in belief.mean] + [_fmt(v) for v in belief.cov[upper]]
            writer.writerow(row)


def read_beliefs_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (means (T, d), covariances (T, d, d)) from a beliefs table."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_cols = data.shape[1] - 1
    # solve d + d(d+1)/2 = n_cols
    d = int(round((-3 + np.sqrt(9 + 8 * n_cols)) / 2))
    if d + d * (d + 1) // 2 != n_cols:
        raise ValueError(f"unexpected column count {n_cols}")
    means = data[:, 1:1 + d]
    covs = np.empty((data.shape[0], d, d))
    upper = np.triu_indices(d)
    for t in range(data.shape[0]):
        flat = data[t, 1 + d:]
        cov = np.zeros((d, d))
        cov[upper] = flat
        cov = cov + np.triu(cov, 1).T
        covs[t] = cov
    return means, covs


def write_population_json(path, pop: PoissonPopulation) -> None:
    payload = {
        "delta": pop.delta,
        "alpha": pop.alpha.tolist(),
        "beta": pop.beta.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_population_json(path) -> PoissonPopulation:
    payload = json.loads(Path(path).read_text())
    return PoissonPopulation(
        np.asarray(payload["alpha"], dtype=float),
        np.asarray(payload["beta"], dtype=float),
        float(payload["delta"]),
    )


def save_config(path, cfg: ExperimentConfig) -> None:
    payload = dataclasses.asdict(cfg)
    payload["methods"] = list(cfg.methods)
    payload["gold_standard"] = list(cfg.gold_standard)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_config(path) -> ExperimentConfig:
    payload = json.loads(Path(path).read_text())
    kwargs = dict(payload)
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "gold_standard" in kwargs:
        kwargs["gold_standard"] = tuple(kwargs["gold_standard"])
    return ExperimentConfig(**kwargs)


def config_hash(cfg: ExperimentConfig) -> str:
    payload = dataclasses.asdict(cfg)
    payload["methods"] = list(cfg.methods)
    payload["gold_standard"] = list(cfg.gold_standard)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(out_dir, cfg: ExperimentConfig, seed: int, extra: dict | None = None) -> None:
    manifest = {
        "config_hash": config_hash(cfg),
        "seed": int(seed),
        "versions": {
            "lgfilter": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    Path(out_dir, "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def write_mise_report_csv(path, report: MiseReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "mise_vs_gold", "se_vs_gold",
                         "mise_vs_truth", "se_vs_truth", "seconds"])
        for name in report.methods:
            writer.writerow([
                name,
                _fmt(report.mise_vs_gold[name]),
                _fmt(report.mise_vs_gold_se[name]),
                _fmt(report.mise_vs_truth[name]),
                _fmt(report.mise_vs_truth_se[name]),
                _fmt(report.seconds[name]),
            ])
        writer.writerow(["posterior", "", "",
                         _fmt(report.posterior_mise), _fmt(report.posterior_mise_se), ""])
        writer.writerow(["gold_noise_floor", _fmt(report.gold_noise_floor), "", "", "",
                         "reliable" if report.gold_reliable else "unreliable"])


def write_timing_csv(path, report: TimingReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "seconds", "se"])
        for name in report.methods:
            writer.writerow([name, _fmt(report.seconds[name]), _fmt(report.seconds_se[name])])


def write_pf_scaling_csv(path, result: PfScalingResult, reference_path=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["M", "mise", "se"])
        for m, value, se in zip(result.particle_grid, result.mise, result.se):
            writer.writerow([m, _fmt(value), _fmt(se)])
    if reference_path is not None:
        with open(reference_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "mise"])
            writer.writerow(["LGF1", _fmt(result.lgf1_mise)])
            writer.writerow(["LGF2", _fmt(result.lgf2_mise)])


def write_stability_csv(out_dir, result: StabilityResult) -> None:
    out_dir = Path(out_dir)
    with open(out_dir / "spread.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "spread"])
        for t, value in enumerate(result.spread, start=1):
            writer.writerow([t, _fmt(value)])
    for idx, states in enumerate(result.trajectories):
        write_trajectory_csv(out_dir / f"trajectory_init{idx + 1}.csv", Trajectory(states, 1.0))
    write_trajectory_csv(out_dir / "true_states.csv", Trajectory(result.true_states, 1.0))
