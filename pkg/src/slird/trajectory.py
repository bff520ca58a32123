"""Dense-output solution storage with constant pre-history.

A :class:`Trajectory` stores states and derivatives at the knots of a
fixed-step integration and evaluates anywhere in [0, t_end] with the cubic
Hermite interpolant of the enclosing step.  Times at or before zero return
the constant pre-history, which is how delayed terms read their values
during the startup phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .model import COMPARTMENTS, HistoryData


def hermite_eval(u, h, knots_y, knots_f, n_complete, pre_value, pre_at_zero=True):
    """Evaluate one solution component at times u (array), vectorized.

    ``knots_y``/``knots_f`` are the component's values and derivatives at
    the uniform knots k*h for k = 0..n_complete; entries of u below zero
    yield ``pre_value`` (at zero too when ``pre_at_zero``, the convention
    delayed terms use).  u must not exceed n_complete*h (the caller
    guarantees this; values up to one knot beyond are clamped into the
    last completed interval, which extends its cubic).
    """
    u = np.asarray(u, dtype=float)
    q = u * (1.0 / h)
    idx = q.astype(np.int64)
    np.clip(idx, 0, n_complete - 1, out=idx)
    th = q - idx
    y0 = knots_y[idx]
    y1 = knots_y[idx + 1]
    f0 = knots_f[idx]
    f1 = knots_f[idx + 1]
    omt = 1.0 - th
    a = th * th
    c = omt * omt
    p = (1.0 + 2.0 * th) * c * y0 + th * c * (h * f0) \
        + a * (3.0 - 2.0 * th) * y1 + a * (th - 1.0) * (h * f1)
    return np.where(u <= 0.0 if pre_at_zero else u < 0.0, pre_value, p)


def hermite_eval_scalar(u, h, knots_y, knots_f, n_complete, pre_value):
    """Scalar counterpart of :func:`hermite_eval`; knot values win at u = 0."""
    if u < 0.0:
        return pre_value
    q = u / h
    idx = int(q)
    if idx > n_complete - 1:
        idx = n_complete - 1
    th = q - idx
    y0 = knots_y[idx]
    f0 = knots_f[idx]
    omt = 1.0 - th
    a = th * th
    c = omt * omt
    return (1.0 + 2.0 * th) * c * y0 + th * c * (h * f0) \
        + a * (3.0 - 2.0 * th) * knots_y[idx + 1] + a * (th - 1.0) * (h * knots_f[idx + 1])


@dataclass(frozen=True)
class Trajectory:
    """Fixed-step solution of a delay system with dense evaluation.

    Attributes
    ----------
    times : ndarray, shape (n+1,)
        Knot times 0, h, 2h, ..., n*h.
    states, derivs : ndarray, shape (n+1, k)
        State and derivative at every knot, one column per component.
    columns : tuple of str
        Component names; the first six are always S, L, I, RT, RP, D.
    prehistory : HistoryData
        Constant S and I values returned for t <= 0.
    pre_state : ndarray, shape (k,)
        Full constant vector returned for t <= 0 (S and I from
        ``prehistory``, auxiliary components from their startup values).
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    prehistory: HistoryData
    pre_state: np.ndarray
    step: float
    columns: tuple = field(default=COMPARTMENTS)

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        states = np.ascontiguousarray(self.states, dtype=float)
        derivs = np.ascontiguousarray(self.derivs, dtype=float)
        pre = np.ascontiguousarray(self.pre_state, dtype=float)
        if times.ndim != 1 or times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if states.shape != (times.size, len(self.columns)) or derivs.shape != states.shape:
            raise ValueError("states/derivs must be (n_knots, n_components)")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "derivs", derivs)
        object.__setattr__(self, "pre_state", pre)
        for a in (times, states, derivs, pre):
            a.setflags(write=False)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def component_index(self, component: Union[int, str]) -> int:
        if isinstance(component, str):
            return self.columns.index(component)
        return int(component)

    def eval(self, t: float, component: Union[int, str, None] = None):
        """State at time t; constant pre-history for t < 0.

        At t = 0 the stored initial knot wins over the pre-history (the
        two differ when the configured c_s is not the derived S(0)).
        Raises for t beyond the stored range (no extrapolation).  With
        ``component`` set, returns that single component as a float.
        """
        if t > self.t_end * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"t = {t} beyond stored trajectory end {self.t_end}")
        if component is not None:
            m = self.component_index(component)
            if t < 0.0:
                return float(self.pre_state[m])
            return float(hermite_eval_scalar(
                t, self.step, self.states[:, m], self.derivs[:, m],
                self.n_steps, self.pre_state[m]))
        if t < 0.0:
            return self.pre_state.copy()
        return np.array([
            hermite_eval_scalar(t, self.step, self.states[:, m], self.derivs[:, m],
                                self.n_steps, self.pre_state[m])
            for m in range(len(self.columns))
        ])

    def sample(self, tgrid, components: Optional[Sequence[Union[int, str]]] = None) -> np.ndarray:
        """Dense evaluation on an array of times; returns (len(tgrid), k)."""
        tgrid = np.asarray(tgrid, dtype=float)
        if tgrid.size and tgrid.max() > self.t_end * (1.0 + 1e-12) + 1e-12:
            raise ValueError("sampling grid exceeds stored trajectory range")
        if components is None:
            comps = range(len(self.columns))
        else:
            comps = [self.component_index(c) for c in components]
        cols = [
            hermite_eval(tgrid, self.step, np.ascontiguousarray(self.states[:, m]),
                         np.ascontiguousarray(self.derivs[:, m]),
                         self.n_steps, self.pre_state[m], pre_at_zero=False)
            for m in comps
        ]
        return np.stack(cols, axis=-1)


def eval_history(traj: Trajectory, t: float, component: Union[int, str]):
    """Component value at time t: pre-history for t < 0, interpolated after."""
    return traj.eval(t, component=component)
