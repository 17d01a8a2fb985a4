import math
import unittest

import numpy as np
import pytest

from epimon import config
from epimon.alarm import AlarmConfig
from epimon.alarm import SlopeEstimate
from epimon.alarm import alarm_level
from epimon.alarm import coverage_experiment
from epimon.alarm import delta_confidence
from epimon.alarm import doubling_time_alarm
from epimon.alarm import interval_alarm_level
from epimon.alarm import monitor
from epimon.alarm import monitor_range
from epimon.alarm import slope_needles
from epimon.alarm import slope_positive_probability
from epimon.consts import LEVELS
from epimon.exceptions import EpimonValidationException
from epimon.exceptions import InsufficientDataError
from epimon.series import ObservationSeries
from epimon.tools.fixtures import decaying_fixture
from epimon.tools.fixtures import resurgence_fixture
from epimon.tools.validate import first_days

EPOCH = '2020-01-01'


def estimate(beta, V, model='laplace-l1'):
    return SlopeEstimate(model, beta, 0.0, math.sqrt(V * 82.5), V, 10, 8, 4.5, 82.5, 9.0)


def geometric(label, rate, days=20, level=1000.0, noise=None):
    t = np.arange(days)
    values = level * np.exp(rate * t + (0.0 if noise is None else noise))
    return ObservationSeries(label, t, np.rint(values).astype(int), EPOCH)


class TestAlarmConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = AlarmConfig.from_settings()

        assert (cfg.theta_warn, cfg.theta_alarm, cfg.window_days) == (0.25, 0.75, 10)
        assert cfg.model == 'l1'

    def test_from_dict(self):
        cfg = AlarmConfig.from_dict({'THETA_WARN': 0.3, 'window_days': 7, 'unknown': 1})

        assert cfg.theta_warn == 0.3
        assert cfg.window_days == 7
        assert cfg.theta_alarm == 0.75

    def test_settings_override(self):
        config.set('ALARM.MODEL', 'ols')
        assert AlarmConfig.from_settings().model == 'ols'

    def test_invalid(self):
        for options in ({'THETA_WARN': 0.8}, {'WINDOW': 2}, {'EPSILON': 1.5}, {'MODEL': 'huber'}, {'D': 0}):
            with pytest.raises(EpimonValidationException):
                AlarmConfig.from_dict(options)


@pytest.mark.parametrize(
    'p_adv, p_disp, expected',
    [
        (0.1, 0.9, 'none'),
        (0.3, 0.9, 'warning'),
        (0.8, 0.1, 'alarm'),
        (0.8, 0.9, 'confirmed'),
        (0.25, 0.0, 'warning'),
        (0.75, 0.75, 'confirmed'),
    ],
)
def test_alarm_level(p_adv, p_disp, expected):
    assert alarm_level(p_adv, p_disp, AlarmConfig()) == expected


def test_alarm_level_invalid():
    with pytest.raises(EpimonValidationException):
        alarm_level(1.2, 0.5, AlarmConfig())


class TestDoubling(unittest.TestCase):
    def test_exact_slopes(self):
        assert doubling_time_alarm(estimate(math.log(2) / 7, 0.0), 14, 0.05, 'false-positive')
        assert doubling_time_alarm(estimate(math.log(2) / 7, 0.0), 14, 0.05, 'false-negative')
        assert not doubling_time_alarm(estimate(math.log(2) / 21, 0.0), 14, 0.05, 'false-positive')
        assert not doubling_time_alarm(estimate(math.log(2) / 21, 0.0), 14, 0.05, 'false-negative')

    def test_at_threshold(self):
        est = estimate(math.log(2) / 14, 1e-4)

        assert not doubling_time_alarm(est, 14, 0.05, 'false-positive')
        assert doubling_time_alarm(est, 14, 0.05, 'false-negative')

    def test_invalid(self):
        with pytest.raises(EpimonValidationException):
            doubling_time_alarm(estimate(0.1, 0.0), 0)

        with pytest.raises(EpimonValidationException):
            doubling_time_alarm(estimate(0.1, 0.0), mode='both')

    def test_delta_confidence(self):
        exact = delta_confidence(estimate(math.log(2) / 10, 0.0))

        assert exact.I1 == pytest.approx((0.0, 10.0))
        assert exact.I2 == pytest.approx((10.0, math.inf))

        falling = delta_confidence(estimate(-0.5, 1e-4))

        assert falling.I1 == (0.0, math.inf)
        assert falling.I2 == (math.inf, math.inf)

    def test_delta_coverage(self):
        result = coverage_experiment('delta-laplace', n=150, reps=2000, seed=1)
        assert abs(result.coverage - 0.95) <= 0.02 * math.sqrt(10000 / 2000)

    @pytest.mark.slow
    def test_delta_coverage_full(self):
        result = coverage_experiment('delta-laplace', n=150, reps=10000, seed=1)
        assert abs(result.coverage - 0.95) <= 0.02

    def test_short_window_undercovers(self):
        short = coverage_experiment('delta-laplace', reps=2000, seed=3)
        long = coverage_experiment('delta-laplace', n=150, reps=2000, seed=3)

        assert short.coverage < long.coverage
        assert short.reps == 2000

    def test_beta_coverage(self):
        result = coverage_experiment('beta-gauss', reps=10000, seed=2)
        assert 0.93 <= result.coverage <= 0.97


class TestNeedles(unittest.TestCase):
    def test_sign_matches_probability(self):
        cfg = AlarmConfig()

        for beta in np.linspace(-0.2, 0.2, 21):
            est = estimate(beta, 0.005)
            needles = slope_needles(est, cfg)
            p = slope_positive_probability(est)

            assert (needles.warn > 0) == (p > cfg.theta_warn)
            assert (needles.alarm > 0) == (p > cfg.theta_alarm)

    def test_interval_level(self):
        assert interval_alarm_level(estimate(0.3, 1e-4), estimate(0.3, 1e-4)) == 'confirmed'
        assert interval_alarm_level(estimate(0.3, 1e-4), estimate(0.0, 1e-4)) == 'alarm'
        assert interval_alarm_level(estimate(0.0, 1e-4), estimate(0.3, 1e-4)) == 'warning'
        assert interval_alarm_level(estimate(-0.3, 1e-4), estimate(0.3, 1e-4)) == 'none'


class TestMonitor(unittest.TestCase):
    def test_rising_both(self):
        report = monitor(geometric('adv', 0.1), geometric('disp', 0.08), AlarmConfig())

        assert report.as_of == 19
        assert report.window == (10, 19)
        assert report.level == 'confirmed'
        assert report.p_adv_plus == pytest.approx(1.0, abs=1e-6)
        assert report.doubling_alarm

    def test_falling(self):
        report = monitor(geometric('adv', -0.1), geometric('disp', -0.1), AlarmConfig())

        assert report.level == 'none'
        assert report.needles['adv'].warn < 0 and report.needles['adv'].alarm < 0

    def test_as_of_date(self):
        report = monitor(geometric('adv', 0.1), geometric('disp', -0.1), AlarmConfig(), as_of='2020-01-15')

        assert report.as_of == 14
        assert report.level == 'alarm'

        payload = report.to_dict()
        assert payload['as_of'] == '2020-01-15'
        assert payload['window'] == ['2020-01-06', '2020-01-15']
        assert payload['series']['adv']['model'] == 'laplace-l1'

    def test_ols_model(self):
        report = monitor(geometric('adv', 0.1), geometric('disp', 0.1), AlarmConfig(model='ols'))
        assert report.estimates[0].model == 'gauss-ols'

    def test_zero_days_dropped(self):
        counts = np.rint(1000 * np.exp(0.1 * np.arange(20))).astype(int)
        counts[15] = 0
        adv = ObservationSeries('adv', range(20), counts.tolist(), EPOCH)

        report = monitor(adv, geometric('disp', 0.1), AlarmConfig())

        assert report.dropped['adv'] == 1
        assert report.estimates[0].n == 9

    def test_insufficient(self):
        short = geometric('adv', 0.1, days=2)

        with pytest.raises(InsufficientDataError):
            monitor(short, geometric('disp', 0.1, days=2), AlarmConfig())

        with pytest.raises(InsufficientDataError):
            monitor(geometric('adv', 0.1), geometric('disp', 0.1), AlarmConfig(), as_of=-3)


@pytest.mark.slow
class TestSequencing(unittest.TestCase):
    def test_resurgence(self):
        fixture = resurgence_fixture(seed=0)
        reports = monitor_range(fixture.adv, fixture.disp, AlarmConfig())
        levels = [r.level for _, r in reports if r is not None]

        assert levels[0] == 'none'

        first = first_days(levels)
        warning, alarm, confirmed = first[0], first[1], first[2]

        assert warning is not None and alarm is not None and confirmed is not None, first
        assert warning < alarm < confirmed, first

    def test_decay_stays_quiet(self):
        fixture = decaying_fixture(seed=0)
        reports = monitor_range(fixture.adv, fixture.disp, AlarmConfig())

        assert all(r is not None for _, r in reports)
        assert {r.level for _, r in reports} == {LEVELS[0]}

        last = reports[-1][1]
        assert last.needles['adv'].warn < 0 and last.needles['adv'].alarm < 0


if __name__ == '__main__':
    unittest.main()
