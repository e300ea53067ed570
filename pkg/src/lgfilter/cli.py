"""Command-line interface.

Subcommands cover single-run simulation, filtering, smoothing, and the
baseline decoders, plus the benchmark drivers that emit machine-readable
tables. All outputs are CSV/JSON files under --out, together with a manifest
recording the config hash, seed, and library versions.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .harness import (
    DESK_SCALE_PF_GRID,
    ExperimentConfig,
    _build_replicate,
    run_pf_scaling,
    run_stability,
    run_table1,
    run_table2,
)
from .lgf import LgfConfig, lgf_filter, lgf_smooth
from .model import GaussianBelief, LinearGaussianTransition, StateSpaceModel, Trajectory
from .neural import PoissonObservation, pva_decode, pva_params_from_population
from .pf import pf_filter

DIFFUSE_VARIANCE = 1e3


def _load_cfg(args) -> ExperimentConfig:
    cfg = dataio.load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, base_seed=args.seed)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _simulation_paths(data_dir: Path) -> dict[str, Path]:
    return {
        "states": data_dir / "states.csv",
        "observations": data_dir / "observations.csv",
        "population": data_dir / "population.json",
        "meta": data_dir / "simulation.json",
    }


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    seed_seq = np.random.SeedSequence(cfg.base_seed).spawn(1)[0]
    data = _build_replicate(cfg, seed_seq)
    paths = _simulation_paths(out)
    dataio.write_trajectory_csv(paths["states"], Trajectory(data.true_states, cfg.delta))
    dataio.write_observations_csv(paths["observations"], data.spikes)
    dataio.write_population_json(paths["population"], data.pop)
    paths["meta"].write_text(json.dumps({
        "x0": data.x0.tolist(),
        "gamma": data.gamma,
        "F_scale": cfg.F_scale,
        "W_scale": cfg.W_scale,
        "delta": cfg.delta,
    }, indent=2) + "\n")
    dataio.write_manifest(out, cfg, cfg.base_seed)
    print(f"wrote simulation ({cfg.T} steps, d={cfg.d}, N={cfg.N}) to {out}")
    return 0


def _load_simulation(data_dir: Path):
    paths = _simulation_paths(data_dir)
    meta = json.loads(paths["meta"].read_text())
    pop = dataio.read_population_json(paths["population"])
    states = dataio.read_trajectory_csv(paths["states"], meta["delta"])
    spikes = dataio.read_observations_csv(paths["observations"])
    d = states.dim
    trans = LinearGaussianTransition(meta["F_scale"] * np.eye(d), meta["W_scale"] * np.eye(d))
    model = StateSpaceModel(trans, PoissonObservation(pop), dt=meta["delta"])
    x0 = np.asarray(meta["x0"], dtype=float)
    return model, pop, x0, states, spikes, meta


def _initial_belief(model, x0, choice: str) -> GaussianBelief:
    if choice == "w":
        return GaussianBelief(x0, model.transition.W)
    return GaussianBelief(x0, DIFFUSE_VARIANCE * np.eye(x0.size))


def cmd_filter(args) -> int:
    model, _, x0, _, spikes, meta = _load_simulation(Path(args.data))
    out = _out_dir(args)
    cfg = LgfConfig.for_order(args.order)
    output = lgf_filter(model, spikes, _initial_belief(model, x0, args.init_cov), cfg,
                        gamma=meta["gamma"])
    dataio.write_beliefs_csv(out / "filtered.csv", output)
    with open(out / "diagnostics.csv", "w") as fh:
        fh.write("t,newton_iterations,seconds\n")
        for t in range(output.steps):
            fh.write(f"{t + 1},{output.newton_iterations[t]},{output.step_seconds[t]!r}\n")
    print(f"order-{args.order} filter: {output.steps} steps -> {out}")
    return 0


def cmd_smooth(args) -> int:
    model, _, x0, _, spikes, meta = _load_simulation(Path(args.data))
    out = _out_dir(args)
    cfg = LgfConfig.for_order(args.order)
    output = lgf_filter(model, spikes, _initial_belief(model, x0, args.init_cov), cfg,
                        gamma=meta["gamma"])
    smoothed = lgf_smooth(output, model.transition)
    dataio.write_beliefs_csv(out / "filtered.csv", output)
    dataio.write_beliefs_csv(out / "smoothed.csv", smoothed)
    print(f"smoothed {smoothed.steps} steps -> {out}")
    return 0


def cmd_pf(args) -> int:
    model, _, x0, _, spikes, _ = _load_simulation(Path(args.data))
    out = _out_dir(args)
    output = pf_filter(model, spikes, args.particles, _initial_belief(model, x0, args.init_cov),
                       args.seed if args.seed is not None else 0)
    dataio.write_beliefs_csv(out / "pf.csv", output)
    print(f"particle filter (M={args.particles}): {output.steps} steps -> {out}")
    return 0


def cmd_pva(args) -> int:
    model, pop, _, _, spikes, meta = _load_simulation(Path(args.data))
    out = _out_dir(args)
    decoded = pva_decode(spikes, pva_params_from_population(pop), meta["delta"])
    dataio.write_trajectory_csv(out / "pva.csv", decoded)
    print(f"population vector decode: {decoded.steps} steps -> {out}")
    return 0


def cmd_table1(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    report = run_table1(cfg)
    dataio.write_mise_report_csv(out / "table1.csv", report)
    dataio.write_manifest(out, cfg, cfg.base_seed)
    for name in report.methods:
        print(f"{name}: mise_vs_gold={report.mise_vs_gold[name]:.3e} "
              f"mise_vs_truth={report.mise_vs_truth[name]:.3e}")
    print(f"posterior (statistical error): {report.posterior_mise:.3e}")
    if not report.gold_reliable:
        print("warning: reference noise floor is not below 10% of the smallest method error",
              file=sys.stderr)
    return 0


def cmd_table2(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    report = run_table2(cfg)
    dataio.write_timing_csv(out / "table2.csv", report)
    dataio.write_manifest(out, cfg, cfg.base_seed)
    for name in report.methods:
        print(f"{name}: {report.seconds[name]:.4f} s")
    return 0


def cmd_pf_scaling(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    grid = tuple(int(v) for v in args.grid.split(",")) if args.grid else DESK_SCALE_PF_GRID
    result = run_pf_scaling(cfg, grid)
    dataio.write_pf_scaling_csv(out / "pf_scaling.csv", result, out / "lgf_reference.csv")
    dataio.write_manifest(out, cfg, cfg.base_seed)
    for m, value in zip(result.particle_grid, result.mise):
        print(f"M={m}: mise={value:.3e}")
    print(f"LGF1 reference: {result.lgf1_mise:.3e}, LGF2 reference: {result.lgf2_mise:.3e}")
    return 0


def cmd_stability(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    result = run_stability(cfg)
    dataio.write_stability_csv(out, result)
    dataio.write_manifest(out, cfg, cfg.base_seed)
    print(f"spread t=1: {result.spread[0]:.3e}, t={cfg.T}: {result.spread[-1]:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lgfilter",
        description="Laplace-Gaussian filtering benchmarks for neural decoding models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config file")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="simulate states and spike counts")
    common(p)
    p.set_defaults(func=cmd_simulate)

    for name, func, help_text in [
        ("filter", cmd_filter, "run the Laplace-Gaussian filter on simulated data"),
        ("smooth", cmd_smooth, "filter then run the backward smoother"),
    ]:
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--data", required=True, help="directory produced by `simulate`")
        p.add_argument("--order", type=int, choices=(1, 2), default=1)
        p.add_argument("--init-cov", choices=("w", "diffuse"), default="w",
                       help="initial covariance: one step of process noise, or diffuse")
        p.set_defaults(func=func)

    p = sub.add_parser("pf", help="run the bootstrap particle filter on simulated data")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--particles", type=int, required=True)
    p.add_argument("--init-cov", choices=("w", "diffuse"), default="w")
    p.set_defaults(func=cmd_pf)

    p = sub.add_parser("pva", help="population vector decode of simulated data")
    common(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_pva)

    for name, func, help_text in [
        ("table1", cmd_table1, "approximation/statistical error per method"),
        ("table2", cmd_table2, "wall-clock seconds per method"),
        ("stability", cmd_stability, "filtered trajectories from perturbed initial beliefs"),
    ]:
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("pf-scaling", help="particle-filter error as a function of M")
    common(p)
    p.add_argument("--grid", help="comma-separated particle counts (default desk-scale grid)")
    p.set_defaults(func=cmd_pf_scaling)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
