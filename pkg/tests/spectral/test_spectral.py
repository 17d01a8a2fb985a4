import math
import unittest

import numpy as np
import pytest

from epimon import config
from epimon.engine import simulate
from epimon.engine import step_matrix
from epimon.exceptions import EpimonNumericalError
from epimon.exceptions import EpimonValidationException
from epimon.model import DensityState
from epimon.model import ModelParams
from epimon.segfit import tropical_check
from epimon.segfit import tropical_fit
from epimon.spectral import characteristic_value
from epimon.spectral import discrete_eigen
from epimon.spectral import doubling_time
from epimon.spectral import eigen_residual
from epimon.spectral import eigenvector
from epimon.spectral import eigvec_distance_bound
from epimon.spectral import hilbert_distance
from epimon.spectral import mu_ratio_bound
from epimon.spectral import perron_eigenvalue
from epimon.spectral import tropical_bound_delta
from epimon.tools.fixtures import closed_form_params
from epimon.tools.fixtures import mu_for
from epimon.tools.validate import closed_form_root


def closed_form_value(lam):
    return math.exp(-3 * lam) * -math.expm1(-7 * lam) / lam


class TestCharacteristic(unittest.TestCase):
    params = closed_form_params(h=0.05)

    def test_at_zero(self):
        assert characteristic_value(self.params, 0.0) == pytest.approx(7.0, rel=1e-12)

    @pytest.mark.filterwarnings('ignore')
    def test_closed_form(self):
        for lam in (-0.3, -0.05, 0.02, 0.1105, 0.5, 1.5):
            assert characteristic_value(self.params, lam) == pytest.approx(closed_form_value(lam), rel=1e-10), lam

    def test_decreasing(self):
        grid = np.linspace(-1.0, 1.0, 81)
        values = [characteristic_value(self.params, lam) for lam in grid]

        assert all(v > 0 for v in values)
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_with_rates(self):
        params = ModelParams.factory(2.0, 5.0, 0.05, K_EI=0.4, K_IR=0.3, psi=1.0)
        lam = 0.05

        # ∫₀⁵ e^{-(λ+0.3)x}dx · (0.4∫₀² e^{-(λ+0.4)x}dx + e^{-2(λ+0.4)})
        first = -math.expm1(-5 * (lam + 0.3)) / (lam + 0.3)
        second = 0.4 * -math.expm1(-2 * (lam + 0.4)) / (lam + 0.4) + math.exp(-2 * (lam + 0.4))

        assert characteristic_value(params, lam) == pytest.approx(first * second, rel=1e-10)


class TestPerron(unittest.TestCase):
    params = closed_form_params(h=0.05)

    def test_critical(self):
        assert perron_eigenvalue(self.params, 1 / 7) == 0.0

    def test_closed_form_roots(self):
        for mu in (2 / 7, 1 / 14, 0.05, 2.0):
            lam = perron_eigenvalue(self.params, mu)

            assert lam == pytest.approx(closed_form_root(mu), abs=1e-8), mu
            assert abs(mu * characteristic_value(self.params, lam) - 1) <= config.get('SPECTRAL.TOL')

    def test_sign_and_monotone(self):
        mus = [0.02, 0.1, 1 / 7, 0.3, 1.0]
        lams = [perron_eigenvalue(self.params, mu) for mu in mus]

        assert lams[0] < 0 < lams[-1]
        assert all(b > a for a, b in zip(lams, lams[1:]))

    def test_bracket_expansion(self):
        config.set('SPECTRAL.BRACKET', [-0.01, 0.01])
        lam = perron_eigenvalue(self.params, 2 / 7)

        assert lam == pytest.approx(closed_form_root(2 / 7), abs=1e-8)

    def test_invalid_mu(self):
        for mu in (0.0, -1.0, math.inf):
            with pytest.raises(EpimonValidationException):
                perron_eigenvalue(self.params, mu)

    def test_expansion_budget(self):
        config.set('SPECTRAL.BRACKET', [-1e-6, 1e-6])
        config.set('SPECTRAL.MAX_EXPAND', 1)

        with pytest.raises(EpimonNumericalError):
            perron_eigenvalue(self.params, 2 / 7)


class TestEigenvector(unittest.TestCase):
    def test_flat_at_zero(self):
        params = closed_form_params(h=0.05)
        solution = eigenvector(params, 0.0, 1 / 7)

        assert np.allclose(solution.n_E, 1.0)
        assert np.allclose(solution.n_I, 1.0)
        assert solution.n_E0 == 1.0 and solution.n_I0 == 1.0
        assert solution.doubling_time == math.inf

    def test_exponential_profile(self):
        params = ModelParams.factory(2.0, 5.0, 0.05, K_EI=0.4, K_IR=0.3, psi=1.0)
        lam = 0.07
        solution = eigenvector(params, lam)

        assert np.allclose(solution.n_E, np.exp(-(lam + 0.4) * params.ages_E), rtol=1e-10)
        assert np.allclose(solution.n_I, solution.n_I0 * np.exp(-(lam + 0.3) * params.ages_I), rtol=1e-10)
        assert np.all(solution.vector() > 0)

    def test_residual(self):
        params = ModelParams.factory(2.0, 5.0, 0.05, K_EI=0.4, K_IR=0.3, psi=1.0)

        for mu in (0.3, 0.8):
            lam = perron_eigenvalue(params, mu)
            assert eigen_residual(params, eigenvector(params, lam, mu), mu) < 1e-4

    def test_discrete_pair(self):
        params = closed_form_params(mu=2 / 7, h=0.1)
        solution = discrete_eigen(params, 2 / 7, dt=0.1)
        matrix = step_matrix(params, 0.1, 2 / 7)
        v = solution.vector()

        assert solution.discrete
        assert np.allclose(matrix @ v, math.exp(solution.lam * 0.1) * v, rtol=1e-8, atol=1e-10)
        assert solution.lam == pytest.approx(perron_eigenvalue(params, 2 / 7), rel=0.02)

    def test_sandwich_between_eigen_modes(self):
        from epimon.engine import step_linear

        params = ModelParams.factory(3.0, 7.0, 0.1, K_EI=0.2, K_IR=0.1, psi=1.0, mu=0.6)
        pair = discrete_eigen(params, 0.6, 0.1)
        v = pair.vector()

        assert np.all(v > 0)

        u = np.random.default_rng(4).uniform(0.5, 2.0, v.size)
        lo, hi = u.min(), u.max()
        state = DensityState.from_vector(params, u * v)

        for k in range(1, 101):
            state = step_linear(state, params, 0.1, mu=0.6)
            growth = math.exp(pair.lam * 0.1 * k)
            x = state.vector()

            assert np.all(x >= lo * growth * v * (1 - 1e-8))
            assert np.all(x <= hi * growth * v * (1 + 1e-8))


class TestHilbert(unittest.TestCase):
    def test_values(self):
        assert hilbert_distance([1, 2, 3], [1, 2, 3]) == 0.0
        assert hilbert_distance([1, 2], [2, 2]) == pytest.approx(math.log(2))
        assert hilbert_distance([1, 2, 5], [3, 6, 15]) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_scale_free(self):
        rng = np.random.default_rng(7)
        v, w = rng.uniform(0.1, 3, 6), rng.uniform(0.1, 3, 6)

        assert hilbert_distance(v, w) == pytest.approx(hilbert_distance(w, v))
        assert hilbert_distance(4.0 * v, 0.5 * w) == pytest.approx(hilbert_distance(v, w))

    def test_invalid(self):
        with pytest.raises(EpimonValidationException):
            hilbert_distance([1, 0], [1, 1])

        with pytest.raises(EpimonValidationException):
            hilbert_distance([1, 2], [1, 2, 3])


class TestBounds(unittest.TestCase):
    def test_delta(self):
        u = np.array([1.0, 2.0, 3.0])

        assert tropical_bound_delta(2 * u, [u, u]).delta == pytest.approx(0.0, abs=1e-12)

        bound = tropical_bound_delta([1.0, 1.0, 1.0], [u, 3 * u])
        assert bound.delta == pytest.approx(math.log(3))
        assert bound.per_hop == pytest.approx((math.log(3), 0.0))

        with pytest.raises(EpimonValidationException):
            tropical_bound_delta(u, [])

    def test_doubling_time(self):
        assert doubling_time(math.log(2) / 5.9) == pytest.approx(5.9)
        assert doubling_time(math.log(2)) == pytest.approx(1.0)
        assert doubling_time(0.0) == math.inf
        assert doubling_time(-math.log(2) / 4) == pytest.approx(-4.0)

    def test_eigvec_distance(self):
        params = closed_form_params(h=0.05)

        for mu1, mu2 in ((0.1, 0.3), (0.05, 0.5), (0.2, 0.21)):
            lam1, lam2 = perron_eigenvalue(params, mu1), perron_eigenvalue(params, mu2)
            distance = hilbert_distance(eigenvector(params, lam1), eigenvector(params, lam2))

            assert distance <= eigvec_distance_bound(lam1, lam2, params) + 1e-9
            assert mu2 / mu1 <= mu_ratio_bound(lam1, lam2, params)


class TestPiecewiseGrowth(unittest.TestCase):
    def test_log_observable_within_half_delta(self):
        h = 0.1
        base = closed_form_params(h=h)
        mus = [mu_for(base, lam) for lam in (0.08, 0.01, -0.06)]

        params = ModelParams.factory(3.0, 7.0, h, psi=1.0, mu_schedule=[(0.0, mus[0]), (30.0, mus[1]), (60.0, mus[2])])
        phases = [discrete_eigen(params, mu, dt=h) for mu in mus]
        init = DensityState.from_profiles(params, n_E=1.0, n_I=1.0)

        trajectory = simulate(params, init, 90, dt=h)
        fit = tropical_fit([p.lam for p in phases], [30.0, 60.0], end=90.0)
        bound = tropical_bound_delta(init, phases)

        sup, passed = tropical_check(trajectory.log_series(), fit, bound.delta)

        assert passed, (sup, bound.delta)
        assert bound.delta > 0

    def test_one_cell_model_is_exact(self):
        params = ModelParams.factory(0.0, 0.1, 0.1, K_IR=0.5, psi=1.0, mu_schedule=[(0.0, 11.0), (10.0, 10.0)])
        phases = [discrete_eigen(params, mu, dt=0.1) for mu in (11.0, 10.0)]
        init = DensityState.from_profiles(params, n_I=1.0)

        trajectory = simulate(params, init, 20, dt=0.1)
        fit = tropical_fit([p.lam for p in phases], [10.0], end=20.0)

        sup, passed = tropical_check(trajectory.log_series(), fit, tropical_bound_delta(init, phases).delta)

        assert passed
        assert sup == pytest.approx(0.0, abs=1e-9)


if __name__ == '__main__':
    unittest.main()
