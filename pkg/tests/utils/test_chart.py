import matplotlib.dates as mdates
import matplotlib.pyplot as plt
import numpy as np
import pytest
from matplotlib.collections import PolyCollection

from epimon.alarm import AlarmConfig
from epimon.alarm import monitor
from epimon.chart import monitor_chart
from epimon.chart import monitor_figure
from epimon.chart import to_datetimes
from epimon.tools.fixtures import resurgence_fixture


@pytest.fixture(scope='module')
def monitored():
    fixture = resurgence_fixture(seed=0, epoch='2020-01-01')
    cfg = AlarmConfig()
    report = monitor(fixture.adv, fixture.disp, cfg, as_of=70)

    return fixture, cfg, report


def test_two_filled_regions_per_series(monitored):
    fixture, cfg, report = monitored
    fig = monitor_figure(fixture.adv, fixture.disp, [(70, report)], cfg)

    try:
        fills = [c for c in fig.axes[0].collections if isinstance(c, PolyCollection)]

        assert len(fills) == 4
        assert [round(c.get_alpha(), 2) for c in fills] == [0.12, 0.35, 0.12, 0.35]

        lo, hi = mdates.date2num(to_datetimes(report.window, '2020-01-01'))

        for est, band, trapezoid in zip(report.estimates, fills[::2], fills[1::2]):
            last = mdates.date2num(to_datetimes([est.x_last], '2020-01-01'))[0]
            x_band = band.get_paths()[0].vertices[:, 0]
            x_trap = trapezoid.get_paths()[0].vertices[:, 0]

            assert x_band.min() == pytest.approx(lo)
            assert x_band.max() == pytest.approx(hi)
            assert x_trap.min() == pytest.approx(last)
            assert x_trap.max() == pytest.approx(last + 6)
    finally:
        plt.close(fig)


def test_band_brackets_window_counts(monitored):
    fixture, cfg, report = monitored
    fig = monitor_figure(fixture.adv, fixture.disp, [(70, report)], cfg)

    try:
        band = fig.axes[0].collections[0].get_paths()[0].vertices[:, 1]
        counts = [c for d, c in fixture.adv.points if report.window[0] <= d <= report.window[1] and c > 0]

        assert np.all(band > 0)
        assert band.min() < np.median(counts) < band.max()
    finally:
        plt.close(fig)


def test_monitor_chart_writes_svg(monitored, tmp_path):
    fixture, cfg, report = monitored
    filename = monitor_chart(fixture.adv, fixture.disp, [(70, report)], cfg, tmp_path / 'monitor.svg', 'abc')

    assert 'config-hash=abc' in filename.read_text(encoding='utf-8')
