import math
import unittest

import numpy as np
import pytest
from scipy.linalg import expm

from epimon.engine import observe
from epimon.engine import seir_growth_rate
from epimon.engine import seir_metzler
from epimon.engine import seir_ode
from epimon.engine import simulate
from epimon.engine import step_linear
from epimon.engine import step_matrix
from epimon.engine import step_nonlinear
from epimon.exceptions import EpimonValidationException
from epimon.model import DensityState
from epimon.model import ModelParams
from epimon.model import ObservableKernel
from epimon.model import load_scenario
from epimon.tools.fixtures import closed_form_scenario


def transport_params(**kwargs):
    options = {'h': 0.1, 'K_EI': 0.0, 'K_IR': 0.0, 'psi': 1.0, 'mu': 0.0}
    options.update(kwargs)
    return ModelParams.factory(1.0, 2.0, **options)


def random_state(params, rng, S=0.0):
    return DensityState(params.h, rng.uniform(0, 2, params.m_E), rng.uniform(0, 2, params.m_I), S)


class TestStep(unittest.TestCase):
    def test_pure_transport(self):
        params = transport_params()
        n_I = np.arange(1.0, params.m_I + 1)
        state = DensityState(params.h, np.zeros(params.m_E), n_I)

        new = step_linear(state, params, params.h)

        assert np.array_equal(new.n_I[1:], n_I[:-1])
        assert new.n_I[0] == 0.0
        assert np.all(new.n_E == 0.0)
        assert new.R == pytest.approx(params.h * n_I[-1], abs=1e-12)
        assert new.t == pytest.approx(params.h)

    def test_exposed_feed_infectious(self):
        params = transport_params()
        n_E = np.zeros(params.m_E)
        n_E[-1] = 3.0
        state = DensityState(params.h, n_E, np.zeros(params.m_I))

        new = step_linear(state, params, params.h)

        assert new.n_I[0] == pytest.approx(3.0, abs=1e-12)
        assert new.E == 0.0

    def test_zero_state(self):
        params = transport_params(K_EI=0.3, K_IR=0.2, mu=0.5)
        new = step_linear(DensityState.zeros(params), params, 0.05)

        assert not new.n_E.any() and not new.n_I.any()

    def test_nonnegative(self):
        rng = np.random.default_rng(1)

        for _ in range(20):
            params = transport_params(K_EI=rng.uniform(0, 2), K_IR=rng.uniform(0, 2), mu=rng.uniform(0, 3))
            state = random_state(params, rng, S=rng.uniform(0, 10))

            for step in (step_linear, step_nonlinear):
                new = step(state, params, rng.uniform(0.01, params.h))
                assert new.n_E.min() >= 0 and new.n_I.min() >= 0 and new.S >= 0

    def test_linearity(self):
        rng = np.random.default_rng(2)
        params = transport_params(K_EI=0.4, K_IR=0.3, mu=0.7)
        x, y = random_state(params, rng), random_state(params, rng)

        combo = DensityState.from_vector(params, 2.0 * x.vector() + 0.5 * y.vector())
        lhs = step_linear(combo, params, 0.07).vector()
        rhs = 2.0 * step_linear(x, params, 0.07).vector() + 0.5 * step_linear(y, params, 0.07).vector()

        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_order_preserving(self):
        rng = np.random.default_rng(3)
        params = transport_params(K_EI=0.4, K_IR=0.3, mu=0.7)
        x = random_state(params, rng)
        y = DensityState.from_vector(params, x.vector() + rng.uniform(0, 1, params.size))

        assert np.all(step_linear(y, params, 0.1).vector() >= step_linear(x, params, 0.1).vector())
        assert np.all(step_matrix(params, 0.1) >= 0)

    def test_cfl_and_grid(self):
        params = transport_params()
        state = DensityState.zeros(params)

        with pytest.raises(EpimonValidationException):
            step_linear(state, params, 2 * params.h)

        with pytest.raises(EpimonValidationException):
            step_linear(state, params, 0.0)

        with pytest.raises(EpimonValidationException):
            step_linear(DensityState(params.h, np.zeros(3), np.zeros(params.m_I)), params, params.h)

    def test_nonlinear_without_susceptibles(self):
        params = transport_params(K_EI=0.3, K_IR=0.2, mu=2.0)
        state = DensityState(params.h, np.zeros(params.m_E), np.ones(params.m_I), S=0.0)

        new = step_nonlinear(state, params, params.h)
        assert new.n_E[0] == 0.0

    def test_nonlinear_conserves_population(self):
        params = transport_params(K_EI=0.3, K_IR=0.25, mu=0.5, h=0.05)
        state = DensityState(params.h, np.zeros(params.m_E), np.ones(params.m_I), S=1000.0)
        total = state.N

        for _ in range(200):
            state = step_nonlinear(state, params, params.h)
            assert state.S <= 1000.0

        assert state.N == pytest.approx(total, rel=1e-9)


    def test_nonlinear_approaches_linear(self):
        params = transport_params(K_EI=0.3, K_IR=0.2, mu=0.8)
        base = DensityState(params.h, np.zeros(params.m_E), np.ones(params.m_I))
        gaps = []

        for S in (1e3, 1e5, 1e7):
            linear = nonlinear = DensityState.from_vector(params, base.vector(), S=S)

            for _ in range(30):
                linear = step_linear(linear, params, params.h)
                nonlinear = step_nonlinear(nonlinear, params, params.h)

            gaps.append(np.abs(nonlinear.vector() - linear.vector()).max() / np.abs(linear.vector()).max())

        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-5

    def test_without_exposed_stage(self):
        params = ModelParams.factory(0.0, 7.0, 0.1, psi=1.0, mu=0.3)
        state = DensityState.from_profiles(params, n_I=1.0)

        assert params.m_E == 0

        new = step_linear(state, params, params.h)

        assert new.n_I[0] == pytest.approx(0.3 * 7.0)
        assert np.array_equal(new.n_I[1:], state.n_I[:-1])
        assert new.E == 0.0

        quiet = simulate(params, DensityState.zeros(params), 10, dt=params.h)

        assert all(s.E == 0.0 and not s.n_I.any() for s in quiet.states)
        assert all(y == 0.0 for y in quiet.values)


class TestObserve(unittest.TestCase):
    def test_unit_kernel(self):
        params = transport_params()
        state = DensityState(params.h, np.zeros(params.m_E), np.full(params.m_I, 2.0))

        assert observe(state, ObservableKernel.unit(params)) == pytest.approx(state.I)
        assert state.I == pytest.approx(4.0)

    def test_pure_delay_tracks_contact_curve(self):
        params = ModelParams.factory(3.0, 10.0, 0.1, mu=0.0)
        init = DensityState.from_profiles(params, n_I={'type': 'triangular', 'center': 1.0, 'width': 2.0, 'height': 1.0})
        kernel = ObservableKernel.pure_delay(params, 2.0, 8.0)

        trajectory = simulate(params, init, 6, dt=params.h, kernel=kernel)

        # 年龄 5 处的观测值等于 t 天前年龄 5 - t 处的密度
        for t in (0, 2, 4, 6):
            expected = 2.0 * max(0.0, 1.0 - abs(5.0 - t - 1.0))
            assert trajectory.values[t] == pytest.approx(expected, abs=0.11), t

    def test_delay_out_of_range(self):
        params = ModelParams.factory(3.0, 10.0, 0.1)

        with pytest.raises(EpimonValidationException):
            ObservableKernel.pure_delay(params, 1.0, 2.0)

        with pytest.raises(EpimonValidationException):
            ObservableKernel.pure_delay(params, 1.0, 14.0)


class TestSimulate(unittest.TestCase):
    def test_zero_horizon(self):
        scenario = load_scenario(closed_form_scenario(horizon=0))
        trajectory = simulate(scenario.params, scenario.init, 0, dt=scenario.dt)

        assert len(trajectory) == 1
        assert trajectory.final.t == 0.0

    def test_daily_records(self):
        scenario = load_scenario(closed_form_scenario(horizon=5))
        trajectory = simulate(scenario.params, scenario.init, 5, dt=scenario.dt)

        assert trajectory.times == pytest.approx([0, 1, 2, 3, 4, 5])

        frame = trajectory.to_frame()
        assert list(frame.columns) == ['t', 'S', 'E', 'I', 'R', 'Y']
        assert frame['t'].iloc[1] == '2020-01-02'

    def test_mu_switch_snapped(self):
        params = ModelParams.factory(3.0, 7.0, 0.1, psi=1.0, mu_schedule=[(0.0, 0.1), (1.04, 0.2)])
        trajectory = simulate(params, DensityState.from_profiles(params, n_I=1.0), 2, dt=0.1)

        assert trajectory.snaps[1][1] == pytest.approx(1.0)

    def test_records_actual_step_time(self):
        params = ModelParams.factory(0.3, 0.6, 0.03, psi=1.0, mu=0.5)
        trajectory = simulate(params, DensityState.from_profiles(params, n_I=1.0), 3, dt=0.03, epoch='2020-01-01')

        assert trajectory.times == pytest.approx([0.0, 0.99, 2.01, 3.0])
        assert [s.t for s in trajectory.states] == pytest.approx(trajectory.times)
        assert list(trajectory.to_frame()['t']) == ['2020-01-01', '2020-01-02', '2020-01-03', '2020-01-04']

    def test_grid_refinement_converges(self):
        values = []

        for h in (0.2, 0.1, 0.05, 0.025):
            scenario = load_scenario(closed_form_scenario(mu=2 / 7, h=h, horizon=20))
            values.append(np.asarray(simulate(scenario.params, scenario.init, 20, dt=h).values))

        changes = [np.abs(a - b).max() / np.abs(b).max() for a, b in zip(values, values[1:])]

        assert changes[0] > 0
        assert changes[1] <= 0.7 * changes[0]
        assert changes[2] <= 0.7 * changes[1]

    def test_growth_matches_eigenvalue(self):
        from epimon.spectral import perron_eigenvalue
        from epimon.alarm import ols_fit

        scenario = load_scenario(closed_form_scenario(mu=2 / 7, h=0.05, horizon=120))
        trajectory = simulate(scenario.params, scenario.init, 120, dt=scenario.dt)

        logs = trajectory.log_series()
        late = logs.x >= 80
        slope = ols_fit(logs.x[late], logs.values[late]).beta_hat
        lam = perron_eigenvalue(scenario.params, 2 / 7)

        assert lam == pytest.approx(0.1105, abs=5e-4)
        assert abs(slope - lam) <= 0.02 * lam


class TestSeir(unittest.TestCase):
    rates = (0.5, 0.3, 0.25)

    def test_constant_rates_match_ode(self):
        params = ModelParams.factory(30.0, 30.0, 0.02, K_EI=0.3, K_IR=0.25, psi=1.0, mu=0.5)
        init = DensityState(params.h, np.zeros(params.m_E), np.r_[1.0 / params.h, np.zeros(params.m_I - 1)])

        trajectory = simulate(params, init, 20, dt=0.02)
        metzler = seir_metzler(self.rates)

        for t in (5, 10, 20):
            E, I = expm(metzler * t) @ np.array([0.0, 1.0])
            state = trajectory.states[t]

            assert state.E == pytest.approx(E, rel=0.03), t
            assert state.I == pytest.approx(I, rel=0.03), t

    def test_disease_free(self):
        frame = seir_ode(self.rates, (1000.0, 0.0, 0.0, 0.0), 30)

        assert np.allclose(frame['S'], 1000.0)
        assert np.allclose(frame[['E', 'I', 'R']].values, 0.0)

    def test_conservation(self):
        frame = seir_ode(self.rates, (990.0, 5.0, 5.0, 0.0), 100)
        total = frame[['S', 'E', 'I', 'R']].sum(axis=1)

        assert np.allclose(total, 1000.0, rtol=1e-9)
        assert (frame['S'].diff().dropna() <= 1e-9).all()

    def test_early_growth(self):
        frame = seir_ode(self.rates, (1e9, 0.0, 1.0, 0.0), 60)
        slope = math.log(frame['I'].iloc[60] / frame['I'].iloc[30]) / 30

        assert slope == pytest.approx(seir_growth_rate(self.rates), rel=0.01)

    def test_invalid(self):
        with pytest.raises(EpimonValidationException):
            seir_ode((0.5, 0.0, 0.25), (1.0, 0.0, 0.0, 0.0), 10)

        with pytest.raises(EpimonValidationException):
            seir_ode(self.rates, (1.0, -1.0, 0.0, 0.0), 10)


if __name__ == '__main__':
    unittest.main()
