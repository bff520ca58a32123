"""Run configuration: TOML parsing, validation, and object assembly.

A run config is a TOML file with four sections: ``[model]`` (baseline
epidemiological constants), ``[kernel.immunity]`` and ``[kernel.latency]``
(delay kernels: family, sigma = support start, lambda = decay rate, M =
truncation point, j = comb size, node_rule), ``[solver]`` (step, t_end,
output_stride, include_gh) and ``[experiment]`` (mode, pairs, output_dir,
reference, ...).  Every field is validated before any computation starts;
violations are reported with their key path.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .kernels import NODE_RULES, KernelDensity, discretize, mean_delay
from .model import HistoryData, ModelParams, default_history
from .harness import StudyConfig

MODES = ("simulate-discrete", "simulate-reference", "simulate-oracle",
         "converge", "bench", "kernel-check")


class ConfigError(ValueError):
    """A config field failed validation; the message names the key path."""


def _get(table: dict, path: str, key: str, kind, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    val = table[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _positive(val, path):
    if not val > 0:
        raise ConfigError(f"{path}: must be > 0")
    return val


@dataclass(frozen=True)
class KernelSpec:
    family: str
    sigma: float
    rate: Optional[float]
    truncation: float
    j: int
    node_rule: str

    def kernel(self) -> KernelDensity:
        if self.family == "shifted-exponential":
            return KernelDensity.shifted_exponential(self.sigma, self.rate)
        return KernelDensity.uniform(self.sigma, self.truncation)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration ready to dispatch."""

    mode: str
    params: ModelParams
    hist: HistoryData
    immunity: KernelSpec
    latency: KernelSpec
    step: float
    t_end: float
    output_stride: int
    include_gh: bool
    pairs: Tuple[Tuple[int, int], ...]
    output_dir: str
    reference: str
    error_grid_step: float
    bench_repeats: int
    bench_warmup: bool

    def study(self) -> StudyConfig:
        n_tau, n_rho = self.latency.j, self.immunity.j
        return StudyConfig(
            params=self.params,
            hist=self.hist,
            immunity_kernel=self.immunity.kernel(),
            latency_kernel=self.latency.kernel(),
            immunity_truncation=self.immunity.truncation,
            latency_truncation=self.latency.truncation,
            t_end=self.t_end,
            step=self.step,
            node_rule=self.immunity.node_rule,
            reference=self.reference,
            error_grid_step=self.error_grid_step,
            bench_pair=(n_tau, n_rho),
        )

    def combs(self):
        imm = discretize(self.immunity.kernel(), self.immunity.truncation,
                         self.immunity.j, self.immunity.node_rule)
        lat = discretize(self.latency.kernel(), self.latency.truncation,
                         self.latency.j, self.latency.node_rule)
        return imm, lat


def _parse_kernel(tables: dict, name: str) -> KernelSpec:
    path = f"kernel.{name}"
    if name not in tables:
        raise ConfigError(f"{path}: section missing")
    t = tables[name]
    family = _get(t, path, "family", str, default="shifted-exponential")
    if family not in ("shifted-exponential", "uniform"):
        raise ConfigError(f"{path}.family: unknown family {family!r} "
                          "(config supports shifted-exponential and uniform)")
    sigma = _positive(_get(t, path, "sigma", float, required=True), f"{path}.sigma")
    rate = _get(t, path, "lambda", float)
    if family == "shifted-exponential":
        if rate is None:
            raise ConfigError(f"{path}.lambda: required for shifted-exponential")
        _positive(rate, f"{path}.lambda")
    trunc = _get(t, path, "M", float, required=True)
    if not trunc > sigma:
        raise ConfigError(f"{path}.M: truncation point must exceed sigma")
    j = _get(t, path, "j", int, required=True)
    if j < 1:
        raise ConfigError(f"{path}.j: need at least one subinterval")
    rule = _get(t, path, "node_rule", str, default="midpoint")
    if rule not in NODE_RULES:
        raise ConfigError(f"{path}.node_rule: must be one of {NODE_RULES}")
    return KernelSpec(family=family, sigma=sigma, rate=rate, truncation=trunc,
                      j=j, node_rule=rule)


def load_config(path: str, mode_override: Optional[str] = None,
                out_override: Optional[str] = None) -> RunConfig:
    """Parse and validate a TOML run config."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return build_config(raw, mode_override=mode_override, out_override=out_override)


def build_config(raw: dict, mode_override: Optional[str] = None,
                 out_override: Optional[str] = None) -> RunConfig:
    model = raw.get("model", {})
    gamma = _get(model, "model", "gamma", float, required=True)
    if gamma < 0:
        raise ConfigError("model.gamma: must be >= 0")
    n0 = _positive(_get(model, "model", "N0", float, required=True), "model.N0")
    beta0 = _get(model, "model", "beta0", float, required=True)
    if beta0 < 0:
        raise ConfigError("model.beta0: must be >= 0")
    i_fr = _get(model, "model", "I_FR", float, default=0.0)
    if not 0.0 <= i_fr < 1.0:
        raise ConfigError("model.I_FR: must lie in [0, 1)")
    p = _get(model, "model", "p", float, required=True)
    if not 0.0 <= p <= 1.0:
        raise ConfigError("model.p: must lie in [0, 1]")
    c_i = _get(model, "model", "c_I", float, required=True)
    if c_i < 0:
        raise ConfigError("model.c_I: must be >= 0")
    mu = _get(model, "model", "mu", float)
    if mu is not None and mu < 0:
        raise ConfigError("model.mu: must be >= 0")
    c_s = _get(model, "model", "c_S", float)
    if c_s is not None:
        _positive(c_s, "model.c_S")

    try:
        params = ModelParams(gamma=gamma, p=p, n0=n0, beta=beta0, i_fr=i_fr, mu=mu)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    kern = raw.get("kernel", {})
    immunity = _parse_kernel(kern, "immunity")
    latency = _parse_kernel(kern, "latency")

    solver = raw.get("solver", {})
    step = _positive(_get(solver, "solver", "step", float, default=0.01), "solver.step")
    t_end = _positive(_get(solver, "solver", "t_end", float, default=365.0), "solver.t_end")
    stride = _get(solver, "solver", "output_stride", int, default=10)
    if stride < 1:
        raise ConfigError("solver.output_stride: must be >= 1")
    include_gh = _get(solver, "solver", "include_gh", bool, default=False)

    exp = raw.get("experiment", {})
    mode = mode_override or _get(exp, "experiment", "mode", str, default="simulate-discrete")
    if mode not in MODES:
        raise ConfigError(f"experiment.mode: unknown mode {mode!r}; pick from {MODES}")
    pairs_raw = _get(exp, "experiment", "pairs", list,
                     default=[[1, 2], [10, 20], [100, 200]])
    pairs = []
    for i, pair in enumerate(pairs_raw):
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or not all(isinstance(x, int) and x >= 1 for x in pair)):
            raise ConfigError(f"experiment.pairs[{i}]: expected [n_tau, n_rho] "
                              "with positive integers")
        pairs.append((pair[0], pair[1]))
    out_dir = out_override or _get(exp, "experiment", "output_dir", str, default="out")
    reference = _get(exp, "experiment", "reference", str, default="chain")
    if reference not in ("chain", "quadrature"):
        raise ConfigError("experiment.reference: must be 'chain' or 'quadrature'")
    grid = _positive(_get(exp, "experiment", "error_grid_step", float, default=0.1),
                     "experiment.error_grid_step")
    repeats = _get(exp, "experiment", "bench_repeats", int, default=3)
    if repeats < 1:
        raise ConfigError("experiment.bench_repeats: must be >= 1")
    warmup = _get(exp, "experiment", "bench_warmup", bool, default=True)

    lat_mean = mean_delay(latency.kernel())
    imm_mean = mean_delay(immunity.kernel())
    if c_s is None:
        hist = default_history(params, c_i, lat_mean, imm_mean)
    else:
        hist = HistoryData(c_s=c_s, c_i=c_i)

    if not math.isfinite(t_end) or not math.isfinite(step):
        raise ConfigError("solver: step and t_end must be finite")

    return RunConfig(
        mode=mode, params=params, hist=hist, immunity=immunity, latency=latency,
        step=step, t_end=t_end, output_stride=stride, include_gh=include_gh,
        pairs=tuple(pairs), output_dir=out_dir, reference=reference,
        error_grid_step=grid, bench_repeats=repeats, bench_warmup=warmup,
    )
