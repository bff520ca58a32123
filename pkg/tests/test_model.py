import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from slird import (
    CompartmentState,
    HistoryData,
    ModelParams,
    default_history,
    derive_mu,
    initial_conditions,
    rhs_discrete,
)

# frozen: brentq solution of the linear S(0) balance with baseline values
S0_BASELINE_CFG = 9999921.000394998


class TestDeriveMu:
    def test_table_value(self):
        assert derive_mu(0.1, 0.425) == pytest.approx(0.0739, abs=5e-5)

    def test_zero_fatality(self):
        assert derive_mu(0.1, 0.0) == 0.0

    def test_even_split(self):
        assert derive_mu(0.2, 0.5) == pytest.approx(0.2, rel=1e-14)

    def test_rejects_certain_death(self):
        with pytest.raises(ValueError):
            derive_mu(0.1, 1.0)

    def test_params_derive_when_unset(self):
        p = ModelParams(gamma=0.1, p=0.9, n0=1e7, beta=5e-8, i_fr=0.425)
        assert p.mu == pytest.approx(derive_mu(0.1, 0.425), abs=1e-15)


class TestInitialConditions:
    def test_baseline_values(self, baseline_params):
        hist = HistoryData(c_s=0.0, c_i=10.0)
        ic = initial_conditions(baseline_params, hist, latency_mean=10.0, immunity_mean=20.0)
        assert ic.r_t == pytest.approx(18.0, rel=1e-14)       # c_i*p*gamma*imm_mean
        assert ic.r_p == pytest.approx(1.0, rel=1e-12)        # (1-p)*gamma*c_i*lat_mean
        assert ic.i == 10.0
        assert ic.d == 0.0
        assert ic.s == pytest.approx(S0_BASELINE_CFG, rel=1e-13)
        assert ic.l == pytest.approx(5e-8 * 10.0 * ic.s * 10.0, rel=1e-14)
        assert ic.total() == pytest.approx(1e7, rel=1e-12)

    def test_s0_matches_balance_equation(self, baseline_params):
        # independent route: root of x*(1 + beta0*c_i*lat_mean) + others - N0
        hist = HistoryData(c_s=0.0, c_i=10.0)
        ic = initial_conditions(baseline_params, hist, latency_mean=10.0, immunity_mean=20.0)

        def balance(x):
            return (x + 5e-8 * 10.0 * 10.0 * x + 10.0 + ic.r_t + ic.r_p - 1e7)

        root = brentq(balance, 0.0, 1e7, xtol=1e-9, rtol=8.9e-16)
        assert ic.s == pytest.approx(root, rel=1e-12)

    def test_no_seed_limit(self, baseline_params):
        ic = initial_conditions(baseline_params, HistoryData(c_s=0.0, c_i=0.0),
                                latency_mean=10.0, immunity_mean=20.0)
        assert ic.s == 1e7
        assert ic.l == ic.r_t == ic.r_p == ic.i == 0.0

    def test_full_temporary_immunity(self):
        params = ModelParams(gamma=0.1, p=1.0, n0=1e7, beta=5e-8)
        ic = initial_conditions(params, HistoryData(c_s=0.0, c_i=10.0),
                                latency_mean=10.0, immunity_mean=20.0)
        assert ic.r_p == 0.0

    def test_rejects_oversized_seed(self, baseline_params):
        with pytest.raises(ValueError, match="negative"):
            initial_conditions(baseline_params, HistoryData(c_s=0.0, c_i=2e7),
                               latency_mean=10.0, immunity_mean=20.0)

    def test_default_history_continuity(self, baseline_params):
        hist = default_history(baseline_params, 10.0, latency_mean=10.0, immunity_mean=20.0)
        ic = initial_conditions(baseline_params, hist, latency_mean=10.0, immunity_mean=20.0)
        assert hist.c_s == ic.s


class TestRhsDiscrete:
    def test_hand_computed_single_lag(self):
        # beta=1, S=2, I=1, lagged I=3, lagged incidence=4, gamma=mu=p=0:
        # dS=-2, dL=-2, dI=4, rest 0
        params = ModelParams(gamma=0.0, p=0.0, n0=10.0, beta=1.0)
        state = CompartmentState(s=2.0, l=0.0, i=1.0, r_t=0.0, r_p=0.0, d=0.0)
        d = rhs_discrete(0.0, state, [3.0], [1.0], [4.0], [1.0], params)
        assert (d.s, d.l, d.i, d.r_t, d.r_p, d.d) == (-2.0, -2.0, 4.0, 0.0, 0.0, 0.0)

    def test_constant_state_cancellation(self, baseline_params):
        state = CompartmentState(s=9e6, l=100.0, i=50.0, r_t=20.0, r_p=10.0, d=5.0)
        d = rhs_discrete(3.0, state, [50.0, 50.0], [0.5, 0.5],
                         [5e-8 * 50.0 * 9e6], [1.0], baseline_params)
        assert d.total() == pytest.approx(0.0, abs=1e-9)

    def test_disease_free(self, baseline_params):
        state = CompartmentState(s=1e7, l=0.0, i=0.0, r_t=0.0, r_p=0.0, d=0.0)
        d = rhs_discrete(0.0, state, [0.0], [1.0], [0.0], [1.0], baseline_params)
        assert all(v == 0.0 for v in (d.s, d.l, d.i, d.r_t, d.r_p, d.d))

    def test_mismatched_weights_rejected(self, baseline_params):
        state = CompartmentState(s=1.0, l=0.0, i=1.0, r_t=0.0, r_p=0.0, d=0.0)
        with pytest.raises(ValueError):
            rhs_discrete(0.0, state, [1.0, 2.0], [1.0], [1.0], [1.0], baseline_params)

    @given(
        s=st.floats(0, 1e7), l=st.floats(0, 1e6), i=st.floats(0, 1e6),
        rt=st.floats(0, 1e6), rp=st.floats(0, 1e6), dd=st.floats(0, 1e6),
        lag_i=st.lists(st.floats(0, 1e6), min_size=1, max_size=5),
        lag_f=st.lists(st.floats(0, 1e3), min_size=1, max_size=5),
        gamma=st.floats(0, 1), p=st.floats(0, 1), i_fr=st.floats(0, 0.9),
    )
    @settings(max_examples=150, deadline=None)
    def test_conservation_property(self, s, l, i, rt, rp, dd, lag_i, lag_f,
                                   gamma, p, i_fr):
        params = ModelParams(gamma=gamma, p=p, n0=1e7, beta=5e-8, i_fr=i_fr)
        state = CompartmentState(s=s, l=l, i=i, r_t=rt, r_p=rp, d=dd)
        wi = [1.0 / len(lag_i)] * len(lag_i)
        wf = [1.0 / len(lag_f)] * len(lag_f)
        d = rhs_discrete(1.0, state, lag_i, wi, lag_f, wf, params)
        scale = max(abs(v) for v in (d.s, d.l, d.i, d.r_t, d.r_p, d.d)) or 1.0
        assert abs(d.total()) <= 1e-12 * max(scale, 1.0)


class TestValidation:
    def test_param_ranges(self):
        with pytest.raises(ValueError):
            ModelParams(gamma=-0.1, p=0.5, n0=1e7, beta=1e-8)
        with pytest.raises(ValueError):
            ModelParams(gamma=0.1, p=1.5, n0=1e7, beta=1e-8)
        with pytest.raises(ValueError):
            ModelParams(gamma=0.1, p=0.5, n0=0.0, beta=1e-8)
        with pytest.raises(ValueError):
            ModelParams(gamma=0.1, p=0.5, n0=1e7, beta=1e-8, i_fr=1.0)

    def test_history_rejects_negative(self):
        with pytest.raises(ValueError):
            HistoryData(c_s=-1.0, c_i=0.0)

    def test_time_varying_beta(self):
        params = ModelParams(gamma=0.1, p=0.9, n0=1e7,
                             beta=lambda t: 5e-8 * (1.0 + 0.1 * np.sin(t / 58.0)))
        assert params.beta0 == pytest.approx(5e-8)
        assert not params.beta_is_constant
        assert params.beta_at(np.array([0.0, 91.1])).shape == (2,)
