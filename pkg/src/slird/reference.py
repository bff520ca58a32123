"""Continuous-kernel reference solvers for the exponential-delay model.

With shifted-exponential delay kernels the distributed-delay terms reduce
to two convolution values: the delayed-infectious term G(t) and the
delayed-incidence term H(t), each with a closed-form pre-history tail.
This module computes the continuous solution two independent ways:

* :func:`solve_reference` evaluates G and H by composite-Simpson
  quadrature over the solution history at every Runge-Kutta stage.  Its
  cost per step grows with elapsed time, so a whole run is quadratic in
  the number of steps; it exists as the direct, assumption-free route.
* :func:`solve_chain_oracle` differentiates the convolutions instead:
  G' = rate1*(I(t - lo1) - G) and H' = rate2*(inc(t - lo2) - H), turning
  the model into an eight-equation two-lag system with linear cost.

Agreement between the two is the artifact's stand-in for "matches the
exact solution".
"""

from __future__ import annotations

import math
from typing import Callable, Union

import numpy as np

from .kernels import SHIFTED_EXPONENTIAL, KernelDensity, mean_delay
from .model import COMPARTMENTS, HistoryData, ModelParams, initial_conditions
from .trajectory import Trajectory, hermite_eval_scalar
from .integrators import SolverError, _n_steps, _run_rk4

# cached integrand factors grow like exp(rate * t); refuse horizons where
# they would leave the comfortably-representable range
_EXP_GUARD = 600.0


def _require_exponential(kernel: KernelDensity, label: str):
    if kernel.family != SHIFTED_EXPONENTIAL:
        raise SolverError(f"{label} kernel must be shifted-exponential for the "
                          "continuous reference (closed-form tails required)")


def _beta_fn(beta: Union[float, Callable[[float], float]]):
    if callable(beta):
        return beta, float(beta(0.0)), False
    return None, float(beta), True


def _simpson_prefix(g: np.ndarray, e: int, h: float) -> float:
    """Composite Simpson over the cached integrand knots 0..e (e even)."""
    if e < 2:
        return 0.0
    return (g[0] + g[e] + 4.0 * g[1:e:2].sum() + 2.0 * g[2:e - 1:2].sum()) * (h / 3.0)


def _simpson_pattern(n: int) -> np.ndarray:
    """Interior composite-Simpson weights 1,4,2,4,2,... for knots 0..n."""
    pat = np.empty(n + 1)
    pat[0] = 1.0
    pat[1::2] = 4.0
    pat[2::2] = 2.0
    return pat


def _conv_value(s_time, lo, lam, pre, vals, ew, pat, buf, h, raw_fn):
    """Convolution value at stage time s_time by quadrature over the history.

    ``vals[m]`` holds the raw integrand at the solution knots (I, or
    beta*I*S), ``ew[m]`` the exponential quadrature weights exp(lam*u_m);
    the weighted integrand is rebuilt and Simpson-reduced on every call.
    The part of [0, s_time - lo] past the last even knot is integrated
    with a single Simpson panel whose interior values come from
    ``raw_fn``, the dense-output integrand.
    """
    ue = s_time - lo
    if ue <= 0.0:
        return pre
    m = int(ue / h + 1e-12)
    e = m - (m & 1)
    if e >= 2:
        g = np.multiply(vals[:e + 1], ew[:e + 1], out=buf[:e + 1])
        # pattern ends on 4 or 2 at index e; the Simpson end weight is 1
        core = (g @ pat[:e + 1] - (pat[e] - 1.0) * g[e]) * (h / 3.0)
        g_e = g[e]
    else:
        core = 0.0
        g_e = vals[0] * ew[0] if e == 0 else 0.0
    a = e * h
    w = ue - a
    if w > 1e-13 * h:
        um = a + 0.5 * w
        rem = (w / 6.0) * (g_e + 4.0 * raw_fn(um) * math.exp(lam * um)
                           + raw_fn(ue) * math.exp(lam * ue))
    else:
        rem = 0.0
    return math.exp(-lam * ue) * (lam * (core + rem) + pre)


def solve_reference(
    params: ModelParams,
    hist: HistoryData,
    immunity_kernel: KernelDensity,
    latency_kernel: KernelDensity,
    t_end: float,
    step: float,
) -> Trajectory:
    """Integrate the continuous-kernel system, evaluating G and H by quadrature.

    Every Runge-Kutta stage integrates the stored solution history against
    the exponential kernels with composite Simpson on the solver's own
    knots, plus the closed-form pre-history tail.  Initial conditions use
    the exact kernel means.
    """
    _require_exponential(immunity_kernel, "immunity")
    _require_exponential(latency_kernel, "latency")
    n = _n_steps(t_end, step)
    h = float(step)
    lam1, lo1 = immunity_kernel.rate, immunity_kernel.support_lo
    lam2, lo2 = latency_kernel.rate, latency_kernel.support_lo
    if max(lam1, lam2) * n * h > _EXP_GUARD:
        raise SolverError("horizon too long for the cached-exponential quadrature; "
                          f"need rate * t_end <= {_EXP_GUARD:g}")

    y0 = initial_conditions(
        params, hist,
        latency_mean=mean_delay(latency_kernel),
        immunity_mean=mean_delay(immunity_kernel),
    ).as_array()

    c_s, c_i = hist.c_s, hist.c_i
    beta_callable, b0, const_beta = _beta_fn(params.beta)
    inc_pre = b0 * c_i * c_s
    pg = params.p * params.gamma
    g1p = (1.0 - params.p) * params.gamma
    mu = params.mu
    gm = params.gamma + mu

    y_t = np.zeros((6, n + 1))
    f_t = np.zeros((6, n + 1))
    y_t[:, 0] = y0
    y_i, f_i = y_t[2], f_t[2]
    y_s, f_s = y_t[0], f_t[0]

    # raw integrand values at the knots (I is the stored solution row; the
    # incidence is cached as each knot is accepted) and the exponential
    # quadrature weights of the two kernels on the knot grid
    vinc = np.zeros(n + 1)
    vinc[0] = b0 * y0[2] * y0[0]
    knot_u = np.arange(n + 1) * h
    ew1 = np.exp(lam1 * knot_u)
    ew2 = np.exp(lam2 * knot_u)
    pat = _simpson_pattern(n)
    buf = np.empty(n + 1)

    def beta_at(t):
        return b0 if const_beta else float(beta_callable(t))

    # dense-output integrands for the partial Simpson panel past the last knot;
    # nc_box tracks how many knots are accepted so far
    nc_box = [1]

    def raw_i(u):
        return hermite_eval_scalar(u, h, y_i, f_i, nc_box[0], c_i)

    def raw_inc(u):
        return beta_at(u) * raw_i(u) * hermite_eval_scalar(u, h, y_s, f_s, nc_box[0], c_s)

    def rhs(bt, s, l, i, rt, rp, d, g, hh):
        inc = bt * i * s
        ret = pg * g
        return (-inc + ret, inc - hh, hh - gm * i, pg * i - ret, g1p * i, mu * i)

    s, l, i, rt, rp, d = (float(v) for v in y0)
    g_right, h_right = c_i, inc_pre  # G, H at the current knot (t = 0: pre-range)
    f_cur = rhs(beta_at(0.0), s, l, i, rt, rp, d, g_right, h_right)
    f_t[:, 0] = f_cur
    # provisional linear extension of the first interval, so dense lookups
    # during step 0 are defined even for delay offsets below one step
    y_t[:, 1] = y0 + h * np.asarray(f_cur)
    f_t[:, 1] = f_cur
    h2, h6 = 0.5 * h, h / 6.0
    n_ref = s + l + i + rt + rp + d

    for k in range(n):
        t = k * h
        nc_box[0] = max(k, 1)
        t_half, t_next = t + h2, t + h
        g_half = _conv_value(t_half, lo1, lam1, c_i, y_i, ew1, pat, buf, h, raw_i)
        g_next = _conv_value(t_next, lo1, lam1, c_i, y_i, ew1, pat, buf, h, raw_i)
        h_half = _conv_value(t_half, lo2, lam2, inc_pre, vinc, ew2, pat, buf, h, raw_inc)
        h_next = _conv_value(t_next, lo2, lam2, inc_pre, vinc, ew2, pat, buf, h, raw_inc)
        bt0, bt1, bt2 = beta_at(t), beta_at(t_half), beta_at(t_next)

        a1s, a1l, a1i, a1rt, a1rp, a1d = f_cur
        a2 = rhs(bt1, s + h2 * a1s, l + h2 * a1l, i + h2 * a1i,
                 rt + h2 * a1rt, rp + h2 * a1rp, d + h2 * a1d, g_half, h_half)
        a3 = rhs(bt1, s + h2 * a2[0], l + h2 * a2[1], i + h2 * a2[2],
                 rt + h2 * a2[3], rp + h2 * a2[4], d + h2 * a2[5], g_half, h_half)
        a4 = rhs(bt2, s + h * a3[0], l + h * a3[1], i + h * a3[2],
                 rt + h * a3[3], rp + h * a3[4], d + h * a3[5], g_next, h_next)
        s += h6 * (a1s + 2.0 * (a2[0] + a3[0]) + a4[0])
        l += h6 * (a1l + 2.0 * (a2[1] + a3[1]) + a4[1])
        i += h6 * (a1i + 2.0 * (a2[2] + a3[2]) + a4[2])
        rt += h6 * (a1rt + 2.0 * (a2[3] + a3[3]) + a4[3])
        rp += h6 * (a1rp + 2.0 * (a2[4] + a3[4]) + a4[4])
        d += h6 * (a1d + 2.0 * (a2[5] + a3[5]) + a4[5])

        tot = s + l + i + rt + rp + d
        if not math.isfinite(tot):
            raise SolverError(f"non-finite state near t = {t_next:g}; solve aborted")
        if abs(tot - n_ref) > 1e-9 * n_ref:
            raise SolverError(
                f"population conservation violated: |N(t)-N(0)|/N(0) = "
                f"{abs(tot - n_ref) / n_ref:.3e}"
            )

        f_cur = rhs(bt2, s, l, i, rt, rp, d, g_next, h_next)
        kk = k + 1
        y_t[0, kk] = s; y_t[1, kk] = l; y_t[2, kk] = i
        y_t[3, kk] = rt; y_t[4, kk] = rp; y_t[5, kk] = d
        f_t[:, kk] = f_cur
        vinc[kk] = bt2 * i * s

    pre_state = y_t[:, 0].copy()
    pre_state[0] = c_s
    pre_state[2] = c_i
    return Trajectory(
        times=np.arange(n + 1) * h,
        states=y_t.T.copy(),
        derivs=f_t.T.copy(),
        prehistory=hist,
        pre_state=pre_state,
        step=h,
        columns=COMPARTMENTS,
    )


def solve_chain_oracle(
    params: ModelParams,
    hist: HistoryData,
    immunity_kernel: KernelDensity,
    latency_kernel: KernelDensity,
    t_end: float,
    step: float,
    _y0_override=None,
) -> Trajectory:
    """Integrate the same dynamics via the differentiated convolutions.

    The convolution values G and H obey single-lag differential equations
    (G' = rate1*(I(t - lo1) - G), H' = rate2*(inc(t - lo2) - H)) with
    initial values c_i and beta0*c_i*c_s, which augment the state to eight
    equations handled by the standard method-of-steps solver.  This is the
    independent cross-check for :func:`solve_reference`.
    """
    _require_exponential(immunity_kernel, "immunity")
    _require_exponential(latency_kernel, "latency")
    n = _n_steps(t_end, step)
    h = float(step)
    lo1, lo2 = immunity_kernel.support_lo, latency_kernel.support_lo
    if h > min(lo1, lo2) / 4.0:
        raise SolverError(
            f"step {h:g} exceeds a quarter of the smallest delay offset "
            f"{min(lo1, lo2):g}"
        )
    if _y0_override is not None:
        y0 = np.asarray(_y0_override[:6], dtype=float)
        chain_init = (float(_y0_override[6]), float(_y0_override[7]))
    else:
        y0 = initial_conditions(
            params, hist,
            latency_mean=mean_delay(latency_kernel),
            immunity_mean=mean_delay(immunity_kernel),
        ).as_array()
        chain_init = (hist.c_i, params.beta0 * hist.c_i * hist.c_s)
    return _run_rk4(
        params, hist, y0, n, h,
        np.array([lo1]), np.array([1.0]),
        np.array([lo2]), np.array([1.0]),
        chain_rates=(immunity_kernel.rate, latency_kernel.rate),
        chain_init=chain_init,
    )


def eval_G(traj: Trajectory, t: float, kernel: KernelDensity) -> float:
    """Delayed-infectious convolution of a finished trajectory at time t.

    For t below the kernel's support start this is the pre-history
    constant c_i; afterwards the integral of I(t - x) against the kernel
    over [lo, t] (composite Simpson on the trajectory knots) plus the
    exact exponential tail.
    """
    _require_exponential(kernel, "immunity")
    return _eval_conv(traj, t, kernel, traj.prehistory.c_i, "G")


def eval_H(traj: Trajectory, t: float, kernel: KernelDensity,
           beta: Union[float, Callable[[float], float]]) -> float:
    """Delayed-incidence convolution beta*I*S of a trajectory at time t."""
    _require_exponential(kernel, "latency")
    _, b0, _ = _beta_fn(beta)
    pre = b0 * traj.prehistory.c_i * traj.prehistory.c_s
    return _eval_conv(traj, t, kernel, pre, "H", beta=beta)


def _eval_conv(traj, t, kernel, pre, which, beta=None):
    if t > traj.t_end * (1.0 + 1e-12) + 1e-12:
        raise ValueError(f"trajectory ends at {traj.t_end}, cannot evaluate at t = {t}")
    lam, lo = kernel.rate, kernel.support_lo
    ue = t - lo
    if ue <= 0.0:
        return float(pre)
    if lam * ue > _EXP_GUARD:
        raise ValueError("t too large for the cached-exponential quadrature")
    h = traj.step
    i_col = traj.component_index("I")
    m = int(ue / h + 1e-12)
    e = m - (m & 1)
    u = traj.times[:e + 1]
    vals = traj.states[:e + 1, i_col].copy()
    if which == "H":
        beta_callable, b0, const_beta = _beta_fn(beta)
        s_vals = traj.states[:e + 1, traj.component_index("S")]
        bvals = b0 if const_beta else np.asarray(beta_callable(u), dtype=float)
        vals = bvals * vals * s_vals
    g = vals * np.exp(lam * u)
    core = _simpson_prefix(g, e, h)
    a = e * h
    w = ue - a
    if w > 1e-13 * h:
        um = a + 0.5 * w

        def integrand(uu):
            v = traj.eval(uu, component="I")
            if which == "H":
                bc = beta(uu) if callable(beta) else beta
                v *= bc * traj.eval(uu, component="S")
            return v * math.exp(lam * uu)

        rem = (w / 6.0) * (g[e] + 4.0 * integrand(um) + integrand(ue))
    else:
        rem = 0.0
    return float(math.exp(-lam * ue) * (lam * (core + rem) + pre))
