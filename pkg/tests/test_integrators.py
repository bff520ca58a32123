import numpy as np
import pytest

from slird import (
    HistoryData,
    KernelDensity,
    SolverError,
    default_history,
    discretize,
    solve_discrete,
)
from conftest import naive_solve


@pytest.fixture(scope="module")
def combs(immunity_kernel, latency_kernel):
    return (discretize(immunity_kernel, 86.0, 20),
            discretize(latency_kernel, 86.0, 10))


class TestSolveDiscrete:
    def test_disease_free_is_constant(self, baseline_params, combs):
        imm, lat = combs
        hist = HistoryData(c_s=1e7, c_i=0.0)
        traj = solve_discrete(baseline_params, hist, imm, lat, 50.0, 0.05)
        assert np.allclose(traj.states, traj.states[0], rtol=0, atol=1e-9)
        assert np.allclose(traj.derivs, 0.0, atol=1e-12)

    def test_conservation(self, baseline_params, baseline_hist, combs):
        imm, lat = combs
        traj = solve_discrete(baseline_params, baseline_hist, imm, lat, 150.0, 0.05)
        totals = traj.states.sum(axis=1)
        assert np.abs(totals - totals[0]).max() / totals[0] < 1e-9

    def test_step_precondition(self, baseline_params, baseline_hist, combs):
        imm, lat = combs
        with pytest.raises(SolverError, match="quarter"):
            solve_discrete(baseline_params, baseline_hist, imm, lat, 10.0, 5.0)

    def test_bad_horizon(self, baseline_params, baseline_hist, combs):
        imm, lat = combs
        with pytest.raises(SolverError):
            solve_discrete(baseline_params, baseline_hist, imm, lat, -1.0, 0.05)
        with pytest.raises(SolverError):
            solve_discrete(baseline_params, baseline_hist, imm, lat, 10.0, 0.0)

    def test_matches_naive_solver_midpoint(self, baseline_params, baseline_hist,
                                           immunity_kernel, latency_kernel):
        imm = discretize(immunity_kernel, 86.0, 7)
        lat = discretize(latency_kernel, 86.0, 3)
        fast = solve_discrete(baseline_params, baseline_hist, imm, lat, 40.0, 0.25)
        ref = naive_solve(baseline_params, baseline_hist, imm, lat, 40.0, 0.25)
        denom = np.maximum(np.abs(ref), 1.0)
        assert (np.abs(fast.states - ref) / denom).max() < 1e-12

    def test_matches_naive_solver_left_rule(self, baseline_params, baseline_hist,
                                            immunity_kernel, latency_kernel):
        # left-rule nodes sit exactly on the support start; exercises the
        # lag-on-knot boundary handling
        imm = discretize(immunity_kernel, 86.0, 8, "left")
        lat = discretize(latency_kernel, 86.0, 4, "left")
        fast = solve_discrete(baseline_params, baseline_hist, imm, lat, 30.0, 0.2)
        ref = naive_solve(baseline_params, baseline_hist, imm, lat, 30.0, 0.2)
        denom = np.maximum(np.abs(ref), 1.0)
        assert (np.abs(fast.states - ref) / denom).max() < 1e-6

    def test_time_varying_beta_matches_naive(self, baseline_hist, immunity_kernel,
                                             latency_kernel):
        from slird import ModelParams

        def beta(t):
            return 5e-8 * (1.0 + 0.2 * np.sin(np.asarray(t) / 30.0))

        params = ModelParams(gamma=0.1, p=0.9, n0=1e7, beta=beta, i_fr=0.425)
        imm = discretize(immunity_kernel, 86.0, 5)
        lat = discretize(latency_kernel, 86.0, 4)
        fast = solve_discrete(params, baseline_hist, imm, lat, 30.0, 0.25)

        # naive oracle with time-varying contact rate
        import conftest

        def naive_beta(params, hist, imm, lat, t_end, h):
            n = int(round(t_end / h))
            ys = np.zeros((n + 1, 6))
            fs = np.zeros((n + 1, 6))
            from slird import initial_conditions
            ys[0] = initial_conditions(
                params, hist, latency_mean=lat.first_moment(),
                immunity_mean=imm.first_moment()).as_array()
            b0 = params.beta0
            pg = params.p * params.gamma
            g1p = (1 - params.p) * params.gamma
            mu = params.mu
            gm = params.gamma + mu

            def hermite(u, comp):
                if u <= 0:
                    return hist.c_i if comp == 2 else (
                        hist.c_s if comp == 0 else ys[0, comp])
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
                li = sum(w * hermite(t - nd, 2)
                         for nd, w in zip(imm.nodes, imm.weights))
                lf = 0.0
                for nd, w in zip(lat.nodes, lat.weights):
                    u = t - nd
                    bt = b0 if u <= 0 else float(beta(u))
                    lf += w * bt * hermite(u, 2) * hermite(u, 0)
                return li, lf

            def rhs(t, y, li, lf):
                s, l, i, rt, rp, d = y
                inc = float(beta(t)) * i * s
                ret = pg * li
                return np.array([-inc + ret, inc - lf, lf - gm * i,
                                 pg * i - ret, g1p * i, mu * i])

            for k in range(n):
                t = k * h
                y = ys[k]
                li0, lf0 = lags(t)
                li1, lf1 = lags(t + h / 2)
                li2, lf2 = lags(t + h)
                k1 = rhs(t, y, li0, lf0)
                if k == 0:
                    fs[0] = k1
                k2 = rhs(t + h / 2, y + h / 2 * k1, li1, lf1)
                k3 = rhs(t + h / 2, y + h / 2 * k2, li1, lf1)
                k4 = rhs(t + h, y + h * k3, li2, lf2)
                ys[k + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                fs[k + 1] = rhs(t + h, ys[k + 1], *lags(t + h))
            return ys

        ref = naive_beta(params, baseline_hist, imm, lat, 30.0, 0.25)
        denom = np.maximum(np.abs(ref), 1.0)
        assert (np.abs(fast.states - ref) / denom).max() < 1e-10

    def test_nan_detection(self, baseline_hist, immunity_kernel, latency_kernel):
        from slird import ModelParams

        # absurd contact rate overflows within the horizon
        params = ModelParams(gamma=0.1, p=0.9, n0=1e7, beta=1e150)
        imm = discretize(immunity_kernel, 86.0, 4)
        lat = discretize(latency_kernel, 86.0, 4)
        with pytest.raises(SolverError):
            solve_discrete(params, baseline_hist, imm, lat, 60.0, 0.2)

    def test_columns_and_prehistory(self, baseline_params, baseline_hist, combs):
        imm, lat = combs
        traj = solve_discrete(baseline_params, baseline_hist, imm, lat, 30.0, 0.1)
        assert traj.columns == ("S", "L", "I", "RT", "RP", "D")
        assert traj.eval(-3.0, component="S") == baseline_hist.c_s
        assert traj.eval(-3.0, component="I") == baseline_hist.c_i
        assert traj.times[0] == 0.0

    def test_non_negativity_over_a_year(self, baseline_params, baseline_hist, combs):
        imm, lat = combs
        traj = solve_discrete(baseline_params, baseline_hist, imm, lat, 365.0, 0.05)
        assert traj.states.min() > -1e-6 * 1e7

    def test_step_halving_order(self, baseline_params, immunity_kernel, latency_kernel):
        # lag-aligned ladder with a startup-consistent history isolates the
        # integrator order from model-level kinks; see also the acceptance run
        imm = discretize(immunity_kernel, 86.0, 20)
        lat = discretize(latency_kernel, 86.0, 10)
        hist = default_history(baseline_params, 10.0,
                               latency_mean=lat.first_moment(),
                               immunity_mean=imm.first_moment())
        t_end = 250.0
        ref = solve_discrete(baseline_params, hist, imm, lat, t_end, 0.003125)
        grid = np.linspace(0.0, t_end, 1001)
        vr = ref.sample(grid)
        errs = []
        for h in (0.05, 0.025, 0.0125):
            tr = solve_discrete(baseline_params, hist, imm, lat, t_end, h)
            errs.append(np.abs(tr.sample(grid) - vr).max())
        slope = np.polyfit(np.log([0.05, 0.025, 0.0125]), np.log(errs), 1)[0]
        assert slope >= 3.5
