"""Convergence and benchmark experiments against the continuous reference.

A sweep solves the discrete-lag model for a list of (n_tau, n_rho) comb
sizes, measures per-compartment sup-norm errors against one shared
reference run, and records wall-clock times.  The benchmark times the
discrete solver, the linear-chain oracle, and the quadrature reference at
identical step and horizon, at one and at twice the configured horizon,
to expose the linear-versus-quadratic cost split.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .kernels import KernelDensity, discretize
from .model import COMPARTMENTS, HistoryData, ModelParams
from .integrators import SolverError, solve_discrete
from .reference import solve_chain_oracle, solve_reference
from .trajectory import Trajectory


@dataclass(frozen=True)
class StudyConfig:
    """Everything needed to run sweeps and benchmarks."""

    params: ModelParams
    hist: HistoryData
    immunity_kernel: KernelDensity
    latency_kernel: KernelDensity
    immunity_truncation: float
    latency_truncation: float
    t_end: float
    step: float
    node_rule: str = "midpoint"
    reference: str = "chain"          # "chain" | "quadrature"
    error_grid_step: float = 0.1
    bench_pair: Tuple[int, int] = (100, 200)

    def combs(self, n_tau: int, n_rho: int):
        """Latency comb with n_tau nodes and immunity comb with n_rho nodes."""
        lat = discretize(self.latency_kernel, self.latency_truncation, n_tau,
                         self.node_rule)
        imm = discretize(self.immunity_kernel, self.immunity_truncation, n_rho,
                         self.node_rule)
        return imm, lat

    def solve_pair(self, n_tau: int, n_rho: int) -> Trajectory:
        imm, lat = self.combs(n_tau, n_rho)
        return solve_discrete(self.params, self.hist, imm, lat, self.t_end, self.step)

    def solve_reference_run(self, kind: Optional[str] = None) -> Trajectory:
        kind = kind or self.reference
        solver = solve_chain_oracle if kind == "chain" else solve_reference
        return solver(self.params, self.hist, self.immunity_kernel,
                      self.latency_kernel, self.t_end, self.step)


def sup_norm_error(
    a: Trajectory,
    b: Trajectory,
    window: Tuple[float, float],
    grid_step: float,
) -> Dict[str, float]:
    """Per-compartment max |a - b| over an evaluation grid on the window.

    Both trajectories are evaluated through their dense output on the same
    grid; only the six model compartments are compared.
    """
    w0, w1 = window
    if w1 > a.t_end * (1 + 1e-12) + 1e-12 or w1 > b.t_end * (1 + 1e-12) + 1e-12:
        raise ValueError("window exceeds a trajectory's stored range")
    if not w1 > w0:
        raise ValueError("window must have positive length")
    grid = np.linspace(w0, w1, int(round((w1 - w0) / grid_step)) + 1)
    va = a.sample(grid, components=COMPARTMENTS)
    vb = b.sample(grid, components=COMPARTMENTS)
    err = np.max(np.abs(va - vb), axis=0)
    return dict(zip(COMPARTMENTS, (float(x) for x in err)))


def _peaks(traj: Trajectory, window: Tuple[float, float], grid_step: float) -> Dict[str, float]:
    w0, w1 = window
    grid = np.linspace(w0, w1, int(round((w1 - w0) / grid_step)) + 1)
    v = np.max(np.abs(traj.sample(grid, components=COMPARTMENTS)), axis=0)
    return dict(zip(COMPARTMENTS, (float(x) for x in v)))


@dataclass(frozen=True)
class SweepEntry:
    n_tau: int
    n_rho: int
    sup_err: Dict[str, float] = field(default_factory=dict)
    rel_sup_err: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    error: Optional[str] = None


@dataclass(frozen=True)
class ConvergenceReport:
    entries: List[SweepEntry]
    reference_meta: Dict[str, object]

    CSV_HEADER = "n_tau,n_rho,err_S,err_L,err_I,err_RT,err_RP,err_D,rel_err_I,wall_ms"

    def to_csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for e in self.entries:
            if e.error is not None:
                cells = [str(e.n_tau), str(e.n_rho)] + ["nan"] * 7 \
                    + [f"{1000.0 * e.wall_time:.3f}"]
                lines.append(",".join(cells) + f"  # {e.error}")
                continue
            cells = [str(e.n_tau), str(e.n_rho)]
            cells += [f"{e.sup_err[c]:.12g}" for c in COMPARTMENTS]
            cells.append(f"{e.rel_sup_err['I']:.12g}")
            cells.append(f"{1000.0 * e.wall_time:.3f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def convergence_sweep(
    config: StudyConfig,
    pairs: Sequence[Tuple[int, int]],
) -> ConvergenceReport:
    """One reference run plus one discrete run per (n_tau, n_rho) pair.

    Failures of individual pairs are recorded in their entries instead of
    aborting the sweep.  Errors are sup-norms over [0, t_end] on the
    configured evaluation grid; relative errors are normalized by the peak
    reference value of the same compartment.
    """
    t0 = time.perf_counter()
    ref = config.solve_reference_run()
    ref_wall = time.perf_counter() - t0
    window = (0.0, config.t_end)
    peaks = _peaks(ref, window, config.error_grid_step)
    entries = []
    for n_tau, n_rho in sorted(pairs):
        t0 = time.perf_counter()
        try:
            traj = config.solve_pair(n_tau, n_rho)
        except SolverError as exc:
            entries.append(SweepEntry(n_tau=n_tau, n_rho=n_rho,
                                      wall_time=time.perf_counter() - t0,
                                      error=str(exc)))
            continue
        wall = time.perf_counter() - t0
        err = sup_norm_error(traj, ref, window, config.error_grid_step)
        rel = {c: (err[c] / peaks[c] if peaks[c] > 0.0 else
                   (0.0 if err[c] == 0.0 else float("inf")))
               for c in COMPARTMENTS}
        entries.append(SweepEntry(n_tau=n_tau, n_rho=n_rho, sup_err=err,
                                  rel_sup_err=rel, wall_time=wall))
    meta = {
        "solver": config.reference,
        "step": config.step,
        "t_end": config.t_end,
        "wall_time": ref_wall,
        "node_rule": config.node_rule,
        "error_grid_step": config.error_grid_step,
    }
    return ConvergenceReport(entries=entries, reference_meta=meta)


@dataclass(frozen=True)
class BenchmarkRow:
    solver: str
    t_end: float
    step: float
    wall_s: float


def _time_solver(fn, repeats: int, warmup: bool) -> float:
    if warmup:
        fn()
    best = float("inf")
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def benchmark(
    config: StudyConfig,
    repeats: int = 3,
    warmup: bool = True,
    horizon_factors: Sequence[float] = (1.0, 2.0),
) -> List[BenchmarkRow]:
    """Wall-clock comparison of the three solver families.

    Times the discrete model at the configured benchmark pair, the
    linear-chain oracle, and the quadrature reference at identical step
    and horizon, once per horizon factor.  Timing is best-of-``repeats``
    with an optional discarded warmup run; runs execute sequentially.
    """
    n_tau, n_rho = config.bench_pair
    rows = []
    for factor in horizon_factors:
        cfg = replace(config, t_end=config.t_end * factor)
        runs = (
            (f"discrete-({n_tau},{n_rho})", lambda c=cfg: c.solve_pair(n_tau, n_rho)),
            ("chain-oracle", lambda c=cfg: c.solve_reference_run("chain")),
            ("quadrature-reference", lambda c=cfg: c.solve_reference_run("quadrature")),
        )
        for name, fn in runs:
            rows.append(BenchmarkRow(solver=name, t_end=cfg.t_end, step=cfg.step,
                                     wall_s=_time_solver(fn, repeats, warmup)))
    return rows


def benchmark_csv_text(rows: Sequence[BenchmarkRow]) -> str:
    lines = ["solver,t_end,step,wall_s"]
    for r in rows:
        lines.append(f"{r.solver},{r.t_end:.12g},{r.step:.12g},{r.wall_s:.6f}")
    return "\n".join(lines) + "\n"
