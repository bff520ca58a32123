"""File outputs: CSV exports, run manifests, and simple SVG line plots.

All writers are deterministic (no timestamps, fixed float formatting) and
atomic: content goes to a temporary file in the target directory and is
renamed into place, so a crashed run never leaves partial artifacts.
CSV files are the artifact contract; the SVG plots are conveniences.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from typing import Optional, Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import __version__  # noqa: E402
from .harness import BenchmarkRow, ConvergenceReport  # noqa: E402
from .kernels import DiracComb  # noqa: E402
from .trajectory import Trajectory  # noqa: E402

# fixed hash salt keeps matplotlib's generated SVG ids reproducible
matplotlib.rcParams["svg.hashsalt"] = "slird"


def atomic_write_text(path: str, text: str) -> None:
    """Write text via a temp file + rename; never leaves partial output."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv_text(
    traj: Trajectory,
    stride: int = 1,
    gh: Optional[Sequence[Sequence[float]]] = None,
) -> str:
    """Trajectory as CSV: t,S,L,I,RT,RP,D,N (+ G,H columns when given).

    ``stride`` keeps every stride-th knot; the final knot is always kept.
    For trajectories that store G and H (the chain oracle) pass
    ``gh=None`` and set stride only; callers wanting G,H for a
    six-column trajectory pass the values sampled at the kept knots.
    """
    if stride < 1:
        raise ValueError("output stride must be >= 1")
    idx = list(range(0, traj.times.size, stride))
    if idx[-1] != traj.times.size - 1:
        idx.append(traj.times.size - 1)
    has_gh = gh is not None or ("G" in traj.columns and "H" in traj.columns)
    header = "t,S,L,I,RT,RP,D,N" + (",G,H" if has_gh else "")
    lines = [header]
    six = traj.states[:, :6]
    if gh is None and has_gh:
        g_col = traj.states[:, traj.component_index("G")]
        h_col = traj.states[:, traj.component_index("H")]
        gh = [(g_col[i], h_col[i]) for i in idx]
    for row, i in enumerate(idx):
        vals = six[i]
        cells = [f"{traj.times[i]:.12g}"] + [f"{v:.12g}" for v in vals]
        cells.append(f"{vals.sum():.12g}")
        if has_gh:
            cells += [f"{gh[row][0]:.12g}", f"{gh[row][1]:.12g}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def comb_csv_text(comb: DiracComb) -> str:
    """Two-column node,weight CSV of a lag comb."""
    lines = ["node,weight"]
    for nd, w in zip(comb.nodes, comb.weights):
        lines.append(f"{nd:.12g},{w:.12g}")
    return "\n".join(lines) + "\n"


def manifest_text(config_path: str, config_bytes: bytes, mode: str,
                  extra: Optional[dict] = None) -> str:
    """Run manifest: config hash, tool version, determinism note."""
    lines = [
        f"tool: slird {__version__}",
        f"mode: {mode}",
        f"config: {os.path.basename(config_path)}",
        f"config_sha256: {hashlib.sha256(config_bytes).hexdigest()}",
        "determinism: fixed-step solvers, no random state; identical config "
        "yields byte-identical outputs",
    ]
    for key, val in (extra or {}).items():
        lines.append(f"{key}: {val}")
    return "\n".join(lines) + "\n"


def _save_svg(fig, path: str) -> None:
    import io

    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_trajectory_svg(path: str, traj: Trajectory, title: str) -> None:
    """One line per compartment over time."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for m, name in enumerate(("S", "L", "I", "RT", "RP", "D")):
        ax.plot(traj.times, traj.states[:, m], label=name, linewidth=1.0)
    ax.set_xlabel("time (days)")
    ax.set_ylabel("individuals")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    _save_svg(fig, path)


def plot_convergence_svg(path: str, report: ConvergenceReport) -> None:
    """Relative sup-norm error of I versus comb size, log-log."""
    ok = [e for e in report.entries if e.error is None]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if ok:
        n = [e.n_tau for e in ok]
        err = [max(e.rel_sup_err["I"], 1e-300) for e in ok]
        ax.loglog(n, err, "o-", label="I")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("latency comb size n_tau")
    ax.set_ylabel("relative sup-norm error")
    ax.set_title("discrete-lag convergence to the reference")
    ax.grid(True, which="both", alpha=0.3)
    _save_svg(fig, path)


def benchmark_svg(path: str, rows: Sequence[BenchmarkRow]) -> None:
    """Bar chart of solver wall times per horizon."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    horizons = sorted({r.t_end for r in rows})
    solvers = list(dict.fromkeys(r.solver for r in rows))
    width = 0.8 / max(len(horizons), 1)
    xs = np.arange(len(solvers))
    for i, t_end in enumerate(horizons):
        vals = [next(r.wall_s for r in rows if r.solver == s and r.t_end == t_end)
                for s in solvers]
        ax.bar(xs + i * width, vals, width, label=f"t_end={t_end:g}")
    ax.set_xticks(xs + width * (len(horizons) - 1) / 2)
    ax.set_xticklabels(solvers, fontsize=8)
    ax.set_ylabel("wall time (s)")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    _save_svg(fig, path)
