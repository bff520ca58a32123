"""Epidemiological parameters, compartment state, and right-hand sides.

The model tracks six compartments: susceptible S, latent L, infectious I,
temporarily recovered RT, permanently recovered RP, and dead D.  New
infections leave S immediately but become infectious only after a
distributed latency delay; a fraction p of recoveries is temporary and
returns to S after a distributed immunity delay.  Both delayed flows enter
the equations as weighted sums over past states, so total population is
conserved identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

COMPARTMENTS = ("S", "L", "I", "RT", "RP", "D")


def derive_mu(gamma: float, i_fr: float) -> float:
    """Disease death rate from the recovery rate and infection fatality risk.

    An infection fatality risk f among exits at rates (gamma, mu) means
    mu / (gamma + mu) = f, i.e. mu = gamma * f / (1 - f).
    """
    if not 0.0 <= i_fr < 1.0:
        raise ValueError("infection fatality risk must lie in [0, 1)")
    return gamma * i_fr / (1.0 - i_fr)


@dataclass(frozen=True)
class ModelParams:
    """Constant model parameters.

    ``beta`` is the contact rate: either a constant (1/day, already scaled
    by population) or a callable of time that also accepts numpy arrays.
    ``mu`` defaults to the value derived from ``i_fr``.
    """

    gamma: float
    p: float
    n0: float
    beta: Union[float, Callable[[float], float]]
    i_fr: float = 0.0
    mu: Optional[float] = None

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not 0.0 <= self.i_fr < 1.0:
            raise ValueError("i_fr must lie in [0, 1)")
        if self.n0 <= 0.0:
            raise ValueError("n0 must be positive")
        if self.mu is None:
            object.__setattr__(self, "mu", derive_mu(self.gamma, self.i_fr))
        if self.mu < 0.0:
            raise ValueError("mu must be non-negative")
        if not callable(self.beta) and self.beta < 0.0:
            raise ValueError("beta must be non-negative")

    @property
    def beta_is_constant(self) -> bool:
        return not callable(self.beta)

    @property
    def beta0(self) -> float:
        """Contact rate at time zero; the constant used in pre-history terms."""
        return float(self.beta(0.0)) if callable(self.beta) else float(self.beta)

    def beta_at(self, t):
        """Contact rate at time(s) t; scalar betas broadcast over arrays."""
        return self.beta(t) if callable(self.beta) else self.beta


@dataclass(frozen=True)
class HistoryData:
    """Constant state before time zero: S = c_s and I = c_i for all t <= 0.

    Zero values are allowed so disease-free runs can be expressed, even
    though an endemic run needs both strictly positive.
    """

    c_s: float
    c_i: float

    def __post_init__(self):
        if self.c_s < 0.0 or self.c_i < 0.0:
            raise ValueError("pre-history values must be non-negative")


@dataclass(frozen=True)
class CompartmentState:
    s: float
    l: float
    i: float
    r_t: float
    r_p: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.l, self.i, self.r_t, self.r_p, self.d])

    @classmethod
    def from_array(cls, a) -> "CompartmentState":
        return cls(*(float(x) for x in a))

    def total(self) -> float:
        return self.s + self.l + self.i + self.r_t + self.r_p + self.d


def initial_conditions(
    params: ModelParams,
    hist: HistoryData,
    latency_mean: float,
    immunity_mean: float,
) -> CompartmentState:
    """Initial compartment values consistent with the constant pre-history.

    ``latency_mean`` is the mean latency delay and ``immunity_mean`` the
    mean immunity delay (for discrete-lag runs, pass the comb first
    moments in their place).  The latent pool starts at
    beta0*c_i*S(0)*latency_mean, the temporary recovered at
    c_i*p*gamma*immunity_mean, the permanent recovered at
    (1-p)*gamma*c_i*latency_mean, and S(0) solves the balance so all six
    compartments sum to n0 with D(0) = 0.
    """
    if latency_mean <= 0.0 or immunity_mean <= 0.0:
        raise ValueError("kernel means must be positive")
    beta0 = params.beta0
    c_i = hist.c_i
    r_t0 = c_i * params.p * params.gamma * immunity_mean
    r_p0 = (1.0 - params.p) * params.gamma * c_i * latency_mean
    denom = 1.0 + beta0 * c_i * latency_mean
    if denom <= 0.0:
        raise ValueError("initial-condition balance has non-positive denominator")
    s0 = (params.n0 - c_i - r_t0 - r_p0) / denom
    l0 = beta0 * c_i * s0 * latency_mean
    state = CompartmentState(s=s0, l=l0, i=c_i, r_t=r_t0, r_p=r_p0, d=0.0)
    if min(s0, l0, c_i, r_t0, r_p0) < 0.0:
        raise ValueError(f"negative initial compartment: {state}")
    return state


def default_history(
    params: ModelParams, c_i: float, latency_mean: float, immunity_mean: float
) -> HistoryData:
    """Pre-history whose c_s equals S(0), so S is continuous at time zero."""
    probe = initial_conditions(params, HistoryData(c_s=0.0, c_i=c_i), latency_mean, immunity_mean)
    return HistoryData(c_s=probe.s, c_i=c_i)


def _rhs_core(beta_t, s, l, i, r_t, r_p, d, lag_i, lag_inc, pg, g1p, gm, mu):
    """Shared derivative core.

    ``lag_i`` is the delayed-infectious term (weighted sum or convolution
    value) feeding RT back to S; ``lag_inc`` the delayed incidence feeding
    L into I.  Used by both the discrete-lag and continuous-kernel systems.
    """
    inc = beta_t * i * s
    ret = pg * lag_i
    return (
        -inc + ret,
        inc - lag_inc,
        lag_inc - gm * i,
        pg * i - ret,
        g1p * i,
        mu * i,
    )


def rhs_discrete(
    t: float,
    current: CompartmentState,
    lagged_i,
    weights_rho,
    lagged_inc,
    weights_tau,
    params: ModelParams,
) -> CompartmentState:
    """Derivative of the discrete-lag system at time t.

    ``lagged_i[k]`` is I evaluated at t minus the k-th immunity lag and
    ``lagged_inc[k]`` the incidence beta*I*S evaluated at t minus the k-th
    latency lag; the weights are the comb weights of those lags.
    """
    lagged_i = np.asarray(lagged_i, dtype=float)
    lagged_inc = np.asarray(lagged_inc, dtype=float)
    weights_rho = np.asarray(weights_rho, dtype=float)
    weights_tau = np.asarray(weights_tau, dtype=float)
    if lagged_i.shape != weights_rho.shape or lagged_inc.shape != weights_tau.shape:
        raise ValueError("lagged value lists must match their weight lists")
    lag_i = float(lagged_i @ weights_rho)
    lag_inc = float(lagged_inc @ weights_tau)
    beta_t = float(params.beta_at(t))
    deriv = _rhs_core(
        beta_t,
        current.s, current.l, current.i, current.r_t, current.r_p, current.d,
        lag_i, lag_inc,
        params.p * params.gamma,
        (1.0 - params.p) * params.gamma,
        params.gamma + params.mu,
        params.mu,
    )
    return CompartmentState(*deriv)
