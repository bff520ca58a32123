"""Delay-kernel densities and their discretization into weighted lag combs.

A delay kernel is a probability density on the positive axis whose support
starts strictly after zero (the shortest possible delay).  Two closed-form
families are provided, ``uniform`` and ``shifted-exponential``, plus a
``tabulated`` family for user-sampled densities.  ``discretize`` turns a
kernel into a :class:`DiracComb`: a finite set of lag nodes and weights
whose weighted sums approximate integrals against the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

UNIFORM = "uniform"
SHIFTED_EXPONENTIAL = "shifted-exponential"
TABULATED = "tabulated"
FAMILIES = (UNIFORM, SHIFTED_EXPONENTIAL, TABULATED)

NODE_RULES = ("midpoint", "left", "right", "centroid")

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class KernelDensity:
    """A delay probability density with closed-form mass and moment queries.

    Attributes
    ----------
    family : str
        One of ``uniform``, ``shifted-exponential``, ``tabulated``.
    support_lo : float
        Start of the support in days; must be > 0 (no zero-length delays).
    support_hi : float
        End of the support; ``inf`` for the shifted-exponential family.
    rate : float, optional
        Decay rate (1/days) of the shifted-exponential family; unused
        otherwise.
    table_x, table_y : ndarray, optional
        Sample grid and density values for the tabulated family.
    """

    family: str
    support_lo: float
    support_hi: float
    rate: Optional[float] = None
    table_x: Optional[np.ndarray] = field(default=None, repr=False)
    table_y: Optional[np.ndarray] = field(default=None, repr=False)
    _table_cdf: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.support_lo > 0.0:
            raise ValueError("support_lo must be strictly positive")
        if not self.support_hi > self.support_lo:
            raise ValueError("support_hi must exceed support_lo")
        if self.family == SHIFTED_EXPONENTIAL:
            if self.rate is None or self.rate <= 0.0:
                raise ValueError("shifted-exponential kernel needs rate > 0")
            if not math.isinf(self.support_hi):
                raise ValueError("shifted-exponential kernel has unbounded support")
        if self.family == UNIFORM and math.isinf(self.support_hi):
            raise ValueError("uniform kernel needs a finite support_hi")
        if self.family == TABULATED:
            self._init_table()

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "KernelDensity":
        """Uniform density on [lo, hi]; mainly useful as a test oracle."""
        return cls(UNIFORM, float(lo), float(hi))

    @classmethod
    def shifted_exponential(cls, lo: float, rate: float) -> "KernelDensity":
        """Density rate * exp(-rate * (x - lo)) for x >= lo, zero before."""
        return cls(SHIFTED_EXPONENTIAL, float(lo), math.inf, rate=float(rate))

    @classmethod
    def tabulated(cls, x: Sequence[float], y: Sequence[float]) -> "KernelDensity":
        """Density sampled on a grid; integrated with composite Simpson."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(TABULATED, float(x[0]), float(x[-1]), table_x=x, table_y=y)

    def _init_table(self):
        x, y = self.table_x, self.table_y
        if x is None or y is None or x.shape != y.shape or x.ndim != 1 or x.size < 3:
            raise ValueError("tabulated kernel needs matching 1-d x/y with >= 3 samples")
        if not np.all(np.diff(x) > 0.0):
            raise ValueError("tabulated kernel abscissae must be strictly increasing")
        if np.any(y < 0.0):
            raise ValueError("tabulated kernel density must be non-negative")
        cdf = cumulative_simpson(y, x=x, initial=0.0)
        if abs(cdf[-1] - 1.0) > _MASS_TOL:
            raise ValueError(
                f"tabulated kernel mass {cdf[-1]!r} differs from 1 by more than {_MASS_TOL}"
            )
        object.__setattr__(self, "_table_cdf", cdf)

    # -- queries -----------------------------------------------------------

    def density(self, x):
        """Density value(s) at x; zero outside the support."""
        x = np.asarray(x, dtype=float)
        if self.family == UNIFORM:
            inside = (x >= self.support_lo) & (x <= self.support_hi)
            return np.where(inside, 1.0 / (self.support_hi - self.support_lo), 0.0)
        if self.family == SHIFTED_EXPONENTIAL:
            z = np.where(x >= self.support_lo, x - self.support_lo, np.inf)
            return self.rate * np.exp(-self.rate * z)
        inside = (x >= self.support_lo) & (x <= self.support_hi)
        vals = np.interp(x, self.table_x, self.table_y)
        return np.where(inside, vals, 0.0)

    def cdf(self, x):
        """Mass on [support_lo, x]; clamps outside the support."""
        x = np.asarray(x, dtype=float)
        lo = self.support_lo
        if self.family == UNIFORM:
            z = np.clip((x - lo) / (self.support_hi - lo), 0.0, 1.0)
            return z
        if self.family == SHIFTED_EXPONENTIAL:
            z = np.where(x > lo, x - lo, 0.0)
            return 1.0 - np.exp(-self.rate * z)
        xq = np.clip(x, lo, self.support_hi)
        return np.interp(xq, self.table_x, self._table_cdf)

    def mass(self, a: float, b: float) -> float:
        """Integral of the density over [a, b]."""
        return float(self.cdf(b) - self.cdf(a))

    def tail_mass(self, m: float) -> float:
        """Mass beyond m, i.e. the part lost when truncating the support at m."""
        if self.family == SHIFTED_EXPONENTIAL:
            # computed directly (not 1-cdf) so the tail is exact for large m
            z = max(m - self.support_lo, 0.0)
            return math.exp(-self.rate * z)
        return float(1.0 - self.cdf(m))


def mean_delay(kernel: KernelDensity) -> float:
    """First moment of the kernel: the mean delay in days.

    Closed form for the uniform ((lo+hi)/2) and shifted-exponential
    (lo + 1/rate) families; composite Simpson for tabulated densities.
    """
    if kernel.family == UNIFORM:
        return 0.5 * (kernel.support_lo + kernel.support_hi)
    if kernel.family == SHIFTED_EXPONENTIAL:
        return kernel.support_lo + 1.0 / kernel.rate
    return float(simpson(kernel.table_x * kernel.table_y, x=kernel.table_x))


def truncation_bound(kernel: KernelDensity, bound_h: float, epsilon: float = 1.0) -> float:
    """Smallest truncation point m with bound_h * tail_mass(m) <= epsilon.

    Only the shifted-exponential family admits the closed form
    m = lo + ln(bound_h / epsilon) / rate; other families have no general
    expression and the caller must pick a truncation point directly.
    """
    if kernel.family != SHIFTED_EXPONENTIAL:
        raise ValueError("truncation_bound has a closed form only for the "
                         "shifted-exponential family; pass a truncation point explicitly")
    if bound_h <= 0.0 or epsilon <= 0.0:
        raise ValueError("bound_h and epsilon must be positive")
    return kernel.support_lo + max(math.log(bound_h / epsilon), 0.0) / kernel.rate


@dataclass(frozen=True)
class DiracComb:
    """Discretization of a kernel into weighted point lags.

    ``grid`` holds the j+1 breakpoints of the truncated support,
    ``weights[i]`` the kernel mass of subinterval i, ``nodes[i]`` the lag
    representing that subinterval, and ``truncation_mass`` the kernel mass
    beyond the last breakpoint.  Weights are never renormalized after
    truncation; the dropped mass is reported instead.
    """

    nodes: np.ndarray
    weights: np.ndarray
    grid: np.ndarray
    truncation_mass: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "grid", grid)
        if nodes.shape != weights.shape or nodes.size != grid.size - 1:
            raise ValueError("comb needs len(grid) == len(nodes) + 1 == len(weights) + 1")
        if not np.all(np.diff(grid) > 0.0):
            raise ValueError("comb grid must be strictly increasing")
        if np.any(weights < 0.0):
            raise ValueError("comb weights must be non-negative")
        if np.any(nodes < grid[:-1]) or np.any(nodes > grid[1:]):
            raise ValueError("every node must lie inside its subinterval")
        total = float(weights.sum()) + self.truncation_mass
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"weights + truncation_mass = {total!r}, expected 1")
        for a in (nodes, weights, grid):
            a.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.size

    def first_moment(self) -> float:
        """Weighted mean lag, the discrete stand-in for the kernel mean."""
        return float(self.nodes @ self.weights)

    def min_lag(self) -> float:
        return float(self.nodes[0])


def build_grid(kernel: KernelDensity, truncation_point: float, j: int) -> np.ndarray:
    """Equispaced breakpoints lo + i*(m - lo)/j for i = 0..j."""
    if j < 1:
        raise ValueError("need at least one subinterval (j >= 1)")
    if not truncation_point > kernel.support_lo:
        raise ValueError("truncation_point must exceed the support start")
    return np.linspace(kernel.support_lo, float(truncation_point), j + 1)


def discretize(
    kernel: KernelDensity,
    truncation_point: float,
    j: int,
    node_rule: str = "midpoint",
) -> DiracComb:
    """Build the j-node comb of a kernel truncated at truncation_point.

    Each weight is the exact kernel mass of its subinterval (closed form
    for the uniform and shifted-exponential families, composite Simpson
    for tabulated ones), so the weights plus the reported truncation mass
    always sum to 1.  The node of a subinterval may be any point inside
    it; the rule picks midpoint (default), left or right endpoints, or
    the kernel centroid of the subinterval (which makes the comb's first
    moment match the truncated kernel mean exactly).
    """
    if node_rule not in NODE_RULES:
        raise ValueError(f"node_rule must be one of {NODE_RULES}")
    grid = build_grid(kernel, truncation_point, j)
    cdf = kernel.cdf(grid)
    weights = np.diff(cdf)
    if node_rule == "midpoint":
        nodes = 0.5 * (grid[:-1] + grid[1:])
    elif node_rule == "left":
        nodes = grid[:-1].copy()
    elif node_rule == "right":
        nodes = grid[1:].copy()
    else:
        nodes = _slice_centroids(kernel, grid)
    return DiracComb(
        nodes=nodes,
        weights=weights,
        grid=grid,
        truncation_mass=kernel.tail_mass(float(grid[-1])),
    )


def _slice_centroids(kernel: KernelDensity, grid: np.ndarray) -> np.ndarray:
    """Kernel centroid of each grid subinterval (mass-weighted mean lag)."""
    a, b = grid[:-1], grid[1:]
    if kernel.family == UNIFORM:
        nodes = 0.5 * (a + b)
    elif kernel.family == SHIFTED_EXPONENTIAL:
        lam, lo = kernel.rate, kernel.support_lo
        ea = np.exp(-lam * (a - lo))
        eb = np.exp(-lam * (b - lo))
        nodes = ((a + 1.0 / lam) * ea - (b + 1.0 / lam) * eb) / (ea - eb)
    else:
        raise ValueError("centroid nodes are implemented for the closed-form "
                         "kernel families only")
    # guard against round-off pushing a node marginally outside its interval
    return np.clip(nodes, a, b)


def comb_integrate(comb: DiracComb, test_fn: Callable) -> float:
    """Integrate a function against the comb: sum of fn(node) * weight."""
    try:
        vals = np.asarray(test_fn(comb.nodes), dtype=float)
        if vals.shape != comb.nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(test_fn(x)) for x in comb.nodes])
    return float(vals @ comb.weights)
