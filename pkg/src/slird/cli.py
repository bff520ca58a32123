"""Command-line entry point.

Dispatches one of six modes from a TOML config: simulate-discrete,
simulate-reference, simulate-oracle, converge, bench, kernel-check.
Outputs are CSV files (the contract) plus SVG plots (convenience) in the
configured output directory; every run also writes a manifest with the
config hash and tool version.  Exit status 0 on success, 2 on config or
validation errors, 1 on solver failures.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from scipy.integrate import quad

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .harness import benchmark, benchmark_csv_text, convergence_sweep
from .integrators import SolverError, solve_discrete
from .kernels import comb_integrate, discretize
from .reference import eval_G, eval_H, solve_chain_oracle, solve_reference
from . import output as out

OUTPUT_DIR_ENV = "SLIRD_OUTPUT_DIR"


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def _write_manifest(cfg: RunConfig, config_path: str, extra=None) -> None:
    with open(config_path, "rb") as fh:
        raw = fh.read()
    text = out.manifest_text(config_path, raw, cfg.mode, extra)
    out.atomic_write_text(os.path.join(cfg.output_dir, "manifest.txt"), text)


def _simulate(cfg: RunConfig, quiet: bool) -> None:
    imm, lat = cfg.combs()
    ik, lk = cfg.immunity.kernel(), cfg.latency.kernel()
    if cfg.mode == "simulate-discrete":
        traj = solve_discrete(cfg.params, cfg.hist, imm, lat, cfg.t_end, cfg.step)
    elif cfg.mode == "simulate-oracle":
        traj = solve_chain_oracle(cfg.params, cfg.hist, ik, lk, cfg.t_end, cfg.step)
    else:
        traj = solve_reference(cfg.params, cfg.hist, ik, lk, cfg.t_end, cfg.step)

    has_gh_cols = "G" in traj.columns
    if cfg.include_gh and not has_gh_cols:
        # reconstruct the convolution values through the public evaluators
        idx = list(range(0, traj.times.size, cfg.output_stride))
        if idx[-1] != traj.times.size - 1:
            idx.append(traj.times.size - 1)
        gh = [(eval_G(traj, float(traj.times[i]), ik),
               eval_H(traj, float(traj.times[i]), lk, cfg.params.beta))
              for i in idx]
        csv = out.trajectory_csv_text(traj, cfg.output_stride, gh=gh)
    elif not cfg.include_gh and has_gh_cols:
        csv = out.trajectory_csv_text(_strip_gh(traj), cfg.output_stride)
    else:
        csv = out.trajectory_csv_text(traj, cfg.output_stride)
    out.atomic_write_text(os.path.join(cfg.output_dir, "trajectory.csv"), csv)
    out.plot_trajectory_svg(os.path.join(cfg.output_dir, "trajectory.svg"),
                            traj, cfg.mode)
    _say(quiet, f"wrote trajectory.csv ({traj.times.size} knots, "
                f"stride {cfg.output_stride}) to {cfg.output_dir}")


def _strip_gh(traj):
    from .trajectory import Trajectory

    return Trajectory(
        times=traj.times, states=traj.states[:, :6], derivs=traj.derivs[:, :6],
        prehistory=traj.prehistory, pre_state=traj.pre_state[:6], step=traj.step,
    )


def _converge(cfg: RunConfig, quiet: bool) -> None:
    report = convergence_sweep(cfg.study(), cfg.pairs)
    out.atomic_write_text(os.path.join(cfg.output_dir, "report.csv"),
                          report.to_csv_text())
    out.plot_convergence_svg(os.path.join(cfg.output_dir, "convergence.svg"), report)
    for e in report.entries:
        if e.error is not None:
            _say(quiet, f"  ({e.n_tau},{e.n_rho}): FAILED: {e.error}")
        else:
            _say(quiet, f"  ({e.n_tau},{e.n_rho}): rel sup err on I = "
                        f"{e.rel_sup_err['I']:.3e}  [{e.wall_time:.2f}s]")
    _say(quiet, f"wrote report.csv to {cfg.output_dir}")


def _bench(cfg: RunConfig, quiet: bool) -> None:
    rows = benchmark(cfg.study(), repeats=cfg.bench_repeats, warmup=cfg.bench_warmup)
    out.atomic_write_text(os.path.join(cfg.output_dir, "timings.csv"),
                          benchmark_csv_text(rows))
    out.benchmark_svg(os.path.join(cfg.output_dir, "timings.svg"), rows)
    for r in rows:
        _say(quiet, f"  {r.solver:24s} t_end={r.t_end:7.1f}  {r.wall_s:8.3f}s")
    _say(quiet, f"wrote timings.csv to {cfg.output_dir}")


def _kernel_check(cfg: RunConfig, quiet: bool) -> None:
    imm, lat = cfg.combs()
    out.atomic_write_text(os.path.join(cfg.output_dir, "comb_immunity.csv"),
                          out.comb_csv_text(imm))
    out.atomic_write_text(os.path.join(cfg.output_dir, "comb_latency.csv"),
                          out.comb_csv_text(lat))
    # weighted-sum convergence table for two smooth test functions against
    # the immunity kernel, with high-accuracy quadrature as the yardstick
    kernel = cfg.immunity.kernel()
    trunc = cfg.immunity.truncation
    tests = (("x^2", lambda x: x * x), ("exp(-x/20)", lambda x: np.exp(-x / 20.0)))
    lines = ["j," + ",".join(f"abs_err_{name}" for name, _ in tests)]
    for j in (2, 4, 8, 16, 32, 64, 128, 256):
        comb = discretize(kernel, trunc, j, cfg.immunity.node_rule)
        cells = [str(j)]
        for _, fn in tests:
            exact = quad(lambda x: fn(x) * kernel.density(x),
                         kernel.support_lo, trunc, epsabs=1e-13, epsrel=1e-13)[0]
            cells.append(f"{abs(comb_integrate(comb, fn) - exact):.12g}")
        lines.append(",".join(cells))
    out.atomic_write_text(os.path.join(cfg.output_dir, "kernel_check.csv"),
                          "\n".join(lines) + "\n")
    _say(quiet, f"wrote comb CSVs and kernel_check.csv to {cfg.output_dir}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slird",
        description="Endemic model with distributed delays: discrete-lag "
                    "simulation, continuous references, convergence studies.",
    )
    parser.add_argument("--config", required=True, help="path to a TOML run config")
    parser.add_argument("--mode", default=None,
                        help="override experiment.mode from the config")
    parser.add_argument("--out", default=None,
                        help="override the output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser.add_argument("--version", action="version", version=f"slird {__version__}")
    args = parser.parse_args(argv)

    out_dir = args.out or os.environ.get(OUTPUT_DIR_ENV)
    try:
        cfg = load_config(args.config, mode_override=args.mode, out_override=out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2

    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
        _write_manifest(cfg, args.config)
        if cfg.mode.startswith("simulate"):
            _simulate(cfg, args.quiet)
        elif cfg.mode == "converge":
            _converge(cfg, args.quiet)
        elif cfg.mode == "bench":
            _bench(cfg, args.quiet)
        else:
            _kernel_check(cfg, args.quiet)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
