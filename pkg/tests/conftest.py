import numpy as np
import pytest

from slird import (
    HistoryData,
    KernelDensity,
    ModelParams,
    default_history,
    initial_conditions,
)


@pytest.fixture(scope="session")
def baseline_params():
    return ModelParams(gamma=0.1, p=0.9, n0=1e7, beta=5e-8, i_fr=0.425)


@pytest.fixture(scope="session")
def immunity_kernel():
    return KernelDensity.shifted_exponential(10.0, 0.1)


@pytest.fixture(scope="session")
def latency_kernel():
    return KernelDensity.shifted_exponential(5.0, 0.2)


@pytest.fixture(scope="session")
def baseline_hist(baseline_params):
    # pre-history consistent with the exact kernel means (10 and 20 days)
    return default_history(baseline_params, 10.0, latency_mean=10.0, immunity_mean=20.0)


def naive_solve(params, hist, imm_comb, lat_comb, t_end, h):
    """Straightforward per-step method-of-steps RK4, used as a cross-check
    oracle for the blocked solver.  Slow; short horizons only."""
    n = int(round(t_end / h))
    ys = np.zeros((n + 1, 6))
    fs = np.zeros((n + 1, 6))
    ic = initial_conditions(params, hist,
                            latency_mean=lat_comb.first_moment(),
                            immunity_mean=imm_comb.first_moment())
    ys[0] = ic.as_array()
    b0 = params.beta0
    pg = params.p * params.gamma
    g1p = (1 - params.p) * params.gamma
    mu = params.mu
    gm = params.gamma + mu

    def hermite(u, comp):
        if u <= 0:
            return hist.c_i if comp == 2 else (hist.c_s if comp == 0 else ys[0, comp])
        q = u / h
        idx = min(int(q), n - 1)
        th = q - idx
        y0, y1 = ys[idx, comp], ys[idx + 1, comp]
        f0, f1 = fs[idx, comp], fs[idx + 1, comp]
        a = th * th
        c = (1 - th) ** 2
        return ((1 + 2 * th) * c * y0 + th * c * h * f0
                + a * (3 - 2 * th) * y1 + a * (th - 1) * h * f1)

    def lags(t):
        li = sum(w * hermite(t - nd, 2) for nd, w in zip(imm_comb.nodes, imm_comb.weights))
        lf = sum(w * b0 * hermite(t - nd, 2) * hermite(t - nd, 0)
                 for nd, w in zip(lat_comb.nodes, lat_comb.weights))
        return li, lf

    def rhs(y, li, lf):
        s, l, i, rt, rp, d = y
        inc = b0 * i * s
        ret = pg * li
        return np.array([-inc + ret, inc - lf, lf - gm * i, pg * i - ret, g1p * i, mu * i])

    for k in range(n):
        t = k * h
        y = ys[k]
        li0, lf0 = lags(t)
        li1, lf1 = lags(t + h / 2)
        li2, lf2 = lags(t + h)
        k1 = rhs(y, li0, lf0)
        if k == 0:
            fs[0] = k1
        k2 = rhs(y + h / 2 * k1, li1, lf1)
        k3 = rhs(y + h / 2 * k2, li1, lf1)
        k4 = rhs(y + h * k3, li2, lf2)
        ys[k + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        fs[k + 1] = rhs(ys[k + 1], *lags(t + h))
    return ys
