"""Fixed-step solver for the discrete-lag system with dense output.

The solver is classical four-stage Runge-Kutta with a cubic-Hermite
continuous extension.  Because every lag is at least the first comb node
away in the past, lagged lookups within a block of steps shorter than the
minimal lag only ever read already-accepted history; the solver exploits
this by prefetching all lagged sums for such a block in vectorized form
and then stepping through the block with scalar arithmetic.

Two structural facts make the prefetch cheap.  On a uniform step the
lagged time for a fixed node advances by exactly one knot per step, so
the interpolation fraction (and the Hermite basis weights) of every
(stage-offset, node) pair is a constant, and the knot values a block
needs form contiguous slices of the knot arrays.  And padding the knot
arrays with the constant pre-history on the left turns the "before
time zero" branch into ordinary reads.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .kernels import DiracComb
from .model import COMPARTMENTS, HistoryData, ModelParams, initial_conditions
from .trajectory import Trajectory


class SolverError(RuntimeError):
    """Raised when a solve aborts (bad step size, NaN/overflow, conservation)."""


def _n_steps(t_end: float, step: float) -> int:
    if step <= 0.0:
        raise SolverError("step must be positive")
    if t_end <= 0.0:
        raise SolverError("t_end must be positive")
    return max(1, int(math.ceil(t_end / step - 1e-9)))


def _hermite_stencil(frac, h):
    """Cubic Hermite basis at a fixed fraction of a step (derivative terms
    carry the step factor)."""
    omt = 1.0 - frac
    a = frac * frac
    c = omt * omt
    return ((1.0 + 2.0 * frac) * c, frac * c * h,
            a * (3.0 - 2.0 * frac), a * (frac - 1.0) * h)


class _LagStencil:
    """Fixed-offset interpolation stencil for one comb on padded knots.

    For stage offsets 0 and 1 the lagged times lie on the knot lattice
    shifted by a constant per node ("int" class, evaluated on nb+1
    lattice points so consecutive steps share values); offset 1/2 forms
    its own class.  ``element_matrix`` returns per-node interpolated
    values for a whole block as an (n_nodes, n_cols) matrix.
    """

    def __init__(self, nodes, h, pad):
        self.pad = pad
        q = np.asarray(nodes) / h
        r_int = -q
        r_half = 0.5 - q
        # small downward bias so a lag landing exactly on a knot reads the
        # knot (fraction 1) instead of jumping to the next interval
        self.o_int = np.floor(r_int - 1e-9).astype(np.int64)
        self.o_half = np.floor(r_half - 1e-9).astype(np.int64)
        self.b_int = _hermite_stencil(r_int - self.o_int, h)
        self.b_half = _hermite_stencil(r_half - self.o_half, h)

    def element_matrix(self, which, k0, ncols, knots_y, knots_f, pre_value):
        o = self.o_int if which == "int" else self.o_half
        b0, b1, b2, b3 = self.b_int if which == "int" else self.b_half
        starts = self.pad + k0 + o
        vy = sliding_window_view(knots_y, ncols + 1)[starts]
        vf = sliding_window_view(knots_f, ncols + 1)[starts]
        vals = (b0[:, None] * vy[:, :ncols] + b1[:, None] * vf[:, :ncols]
                + b2[:, None] * vy[:, 1:] + b3[:, None] * vf[:, 1:])
        # reads straddling the startup interval [-h, 0] must see the exact
        # pre-history constant, not a blend into the initial knot; at most
        # one column per node lands there
        cols = -1 - k0 - o
        sel = (cols >= 0) & (cols < ncols)
        if sel.any():
            vals[sel, cols[sel]] = pre_value
        return vals


def _check_block(y_t, k_from, k_to, h, n_ref):
    """Abort on NaN/overflow or conservation drift in freshly written knots."""
    block = y_t[:6, k_from:k_to]
    if not np.isfinite(block).all():
        bad = np.argwhere(~np.isfinite(block))
        t_bad = (k_from + int(bad[0, 1])) * h
        raise SolverError(f"non-finite state near t = {t_bad:g}; solve aborted")
    totals = block.sum(axis=0)
    drift = np.max(np.abs(totals - n_ref))
    if drift > 1e-9 * n_ref:
        raise SolverError(
            f"population conservation violated: |N(t)-N(0)|/N(0) = {drift / n_ref:.3e}"
        )


def solve_discrete(
    params: ModelParams,
    hist: HistoryData,
    immunity_comb: DiracComb,
    latency_comb: DiracComb,
    t_end: float,
    step: float,
) -> Trajectory:
    """Integrate the discrete-lag system over [0, t_end].

    Initial conditions use the comb first moments in place of the kernel
    means.  The step must not exceed a quarter of the smallest lag in
    either comb, so lagged lookups never run ahead of accepted history.
    """
    n = _n_steps(t_end, step)
    h = float(step)
    min_lag = min(immunity_comb.min_lag(), latency_comb.min_lag())
    if h > min_lag / 4.0:
        raise SolverError(
            f"step {h:g} exceeds a quarter of the smallest lag {min_lag:g}"
        )
    y0 = initial_conditions(
        params, hist,
        latency_mean=latency_comb.first_moment(),
        immunity_mean=immunity_comb.first_moment(),
    ).as_array()
    return _run_rk4(params, hist, y0, n, h,
                    immunity_comb.nodes, immunity_comb.weights,
                    latency_comb.nodes, latency_comb.weights)


def _run_rk4(params, hist, y0, n, h, imm_nodes, imm_w, lat_nodes, lat_w,
             chain_rates=None, chain_init=()):
    """Blocked method-of-steps RK4 over n steps of size h.

    With ``chain_rates=(lam1, lam2)`` the state is augmented by the two
    convolution values (G, H), which then replace the prefetched lagged
    sums inside the compartment equations while the prefetched single-lag
    terms drive the G/H equations themselves (linear-chain form).
    """
    use_chain = chain_rates is not None
    ncomp = 8 if use_chain else 6
    if use_chain:
        lam1, lam2 = chain_rates
        if len(chain_init) != 2:
            raise SolverError("chain variant needs initial (G, H) values")

    c_s, c_i = hist.c_s, hist.c_i
    pg = params.p * params.gamma
    g1p = (1.0 - params.p) * params.gamma
    mu = params.mu
    gm = params.gamma + mu
    const_beta = params.beta_is_constant
    b0 = params.beta0

    max_lag = max(imm_nodes[-1], lat_nodes[-1])
    min_lag = min(imm_nodes[0], lat_nodes[0])
    block = max(1, int(min_lag / h))
    pad = int(math.ceil(max_lag / h)) + 2

    # knot storage, left-padded with the constant pre-history so lagged
    # reads before t = 0 need no special casing (derivatives pre-fill as 0)
    y_t = np.zeros((ncomp, pad + n + 1))
    f_t = np.zeros((ncomp, pad + n + 1))
    y_t[0, :pad] = c_s
    y_t[2, :pad] = c_i
    if use_chain:
        y_t[6, :pad] = chain_init[0]
        y_t[7, :pad] = chain_init[1]
    y_t[:6, pad] = y0
    for idx, val in enumerate(chain_init):
        y_t[6 + idx, pad] = val
    n_ref = float(y_t[:6, pad].sum())

    y_i, f_i = y_t[2], f_t[2]
    y_s, f_s = y_t[0], f_t[0]
    imm_st = _LagStencil(imm_nodes, h, pad)
    lat_st = _LagStencil(lat_nodes, h, pad)
    imm_w = np.asarray(imm_w, dtype=float)
    lat_w = np.asarray(lat_w, dtype=float)

    def lagged_grids(k0, nb):
        """Lagged sums on the knot lattice (nb+1 values) and the half
        lattice (nb values) for steps k0..k0+nb-1."""
        li_int = imm_w @ imm_st.element_matrix("int", k0, nb + 1, y_i, f_i, c_i)
        li_half = imm_w @ imm_st.element_matrix("half", k0, nb, y_i, f_i, c_i)
        iv_int = lat_st.element_matrix("int", k0, nb + 1, y_i, f_i, c_i)
        sv_int = lat_st.element_matrix("int", k0, nb + 1, y_s, f_s, c_s)
        iv_half = lat_st.element_matrix("half", k0, nb, y_i, f_i, c_i)
        sv_half = lat_st.element_matrix("half", k0, nb, y_s, f_s, c_s)
        if const_beta:
            lf_int = b0 * (lat_w @ (iv_int * sv_int))
            lf_half = b0 * (lat_w @ (iv_half * sv_half))
        else:
            t_int = (k0 + np.arange(nb + 1))[None, :] * h - lat_nodes[:, None]
            t_half = t_int[:, :nb] + 0.5 * h
            bv_int = np.where(t_int <= 0.0, b0,
                              params.beta_at(np.maximum(t_int, 0.0)))
            bv_half = np.where(t_half <= 0.0, b0,
                               params.beta_at(np.maximum(t_half, 0.0)))
            lf_int = lat_w @ (bv_int * iv_int * sv_int)
            lf_half = lat_w @ (bv_half * iv_half * sv_half)
        return li_int, li_half, lf_int, lf_half

    def rhs6(bt, s, l, i, rt, rp, d, li, lf):
        inc = bt * i * s
        ret = pg * li
        return (-inc + ret, inc - lf, lf - gm * i, pg * i - ret, g1p * i, mu * i)

    def rhs8(bt, state, ilag, inclag):
        s, l, i, rt, rp, d, g, hh = state
        inc = bt * i * s
        ret = pg * g
        return (-inc + ret, inc - hh, hh - gm * i, pg * i - ret, g1p * i, mu * i,
                lam1 * (ilag - g), lam2 * (inclag - hh))

    y_cur = tuple(float(v) for v in y_t[:, pad])
    f_cur = None
    h2, h6 = 0.5 * h, h / 6.0
    k = 0
    while k < n:
        kend = min(k + block, n)
        nb = kend - k
        li_int, li_half, lf_int, lf_half = lagged_grids(k, nb)
        li_int = li_int.tolist()
        li_half = li_half.tolist()
        lf_int = lf_int.tolist()
        lf_half = lf_half.tolist()
        if const_beta:
            bt_int = bt_half = None
        else:
            tt = (k + np.arange(nb + 1)) * h
            bt_int = np.asarray(params.beta_at(tt), dtype=float).tolist()
            bt_half = np.asarray(params.beta_at(tt[:nb] + h2), dtype=float).tolist()

        if use_chain:
            for b in range(nb):
                li0, li1, li2 = li_int[b], li_half[b], li_int[b + 1]
                lf0, lf1, lf2 = lf_int[b], lf_half[b], lf_int[b + 1]
                if const_beta:
                    bt0 = bt1 = bt2 = b0
                else:
                    bt0, bt1, bt2 = bt_int[b], bt_half[b], bt_int[b + 1]
                if f_cur is None:
                    f_cur = rhs8(bt0, y_cur, li0, lf0)
                    f_t[:, pad] = f_cur
                a1 = f_cur
                y2 = tuple(y_cur[m] + h2 * a1[m] for m in range(8))
                a2 = rhs8(bt1, y2, li1, lf1)
                y3 = tuple(y_cur[m] + h2 * a2[m] for m in range(8))
                a3 = rhs8(bt1, y3, li1, lf1)
                y4 = tuple(y_cur[m] + h * a3[m] for m in range(8))
                a4 = rhs8(bt2, y4, li2, lf2)
                y_cur = tuple(
                    y_cur[m] + h6 * (a1[m] + 2.0 * (a2[m] + a3[m]) + a4[m])
                    for m in range(8)
                )
                f_cur = rhs8(bt2, y_cur, li2, lf2)
                kk = pad + k + b + 1
                y_t[:, kk] = y_cur
                f_t[:, kk] = f_cur
        else:
            s, l, i, rt, rp, d = y_cur
            for b in range(nb):
                li0, li1, li2 = li_int[b], li_half[b], li_int[b + 1]
                lf0, lf1, lf2 = lf_int[b], lf_half[b], lf_int[b + 1]
                if const_beta:
                    bt0 = bt1 = bt2 = b0
                else:
                    bt0, bt1, bt2 = bt_int[b], bt_half[b], bt_int[b + 1]
                if f_cur is None:
                    f_cur = rhs6(bt0, s, l, i, rt, rp, d, li0, lf0)
                    f_t[:, pad] = f_cur
                a1s, a1l, a1i, a1rt, a1rp, a1d = f_cur
                a2s, a2l, a2i, a2rt, a2rp, a2d = rhs6(
                    bt1, s + h2 * a1s, l + h2 * a1l, i + h2 * a1i,
                    rt + h2 * a1rt, rp + h2 * a1rp, d + h2 * a1d, li1, lf1)
                a3s, a3l, a3i, a3rt, a3rp, a3d = rhs6(
                    bt1, s + h2 * a2s, l + h2 * a2l, i + h2 * a2i,
                    rt + h2 * a2rt, rp + h2 * a2rp, d + h2 * a2d, li1, lf1)
                a4s, a4l, a4i, a4rt, a4rp, a4d = rhs6(
                    bt2, s + h * a3s, l + h * a3l, i + h * a3i,
                    rt + h * a3rt, rp + h * a3rp, d + h * a3d, li2, lf2)
                s += h6 * (a1s + 2.0 * (a2s + a3s) + a4s)
                l += h6 * (a1l + 2.0 * (a2l + a3l) + a4l)
                i += h6 * (a1i + 2.0 * (a2i + a3i) + a4i)
                rt += h6 * (a1rt + 2.0 * (a2rt + a3rt) + a4rt)
                rp += h6 * (a1rp + 2.0 * (a2rp + a3rp) + a4rp)
                d += h6 * (a1d + 2.0 * (a2d + a3d) + a4d)
                f_cur = rhs6(bt2, s, l, i, rt, rp, d, li2, lf2)
                kk = pad + k + b + 1
                y_t[0, kk] = s; y_t[1, kk] = l; y_t[2, kk] = i
                y_t[3, kk] = rt; y_t[4, kk] = rp; y_t[5, kk] = d
                f_t[:, kk] = f_cur
            y_cur = (s, l, i, rt, rp, d)
        _check_block(y_t[:, pad:], k + 1, kend + 1, h, n_ref)
        k = kend

    pre_state = y_t[:, pad].copy()
    pre_state[0] = c_s
    pre_state[2] = c_i
    columns = COMPARTMENTS if ncomp == 6 else COMPARTMENTS + ("G", "H")
    return Trajectory(
        times=np.arange(n + 1) * h,
        states=y_t[:, pad:].T.copy(),
        derivs=f_t[:, pad:].T.copy(),
        prehistory=hist,
        pre_state=pre_state,
        step=h,
        columns=columns,
    )
