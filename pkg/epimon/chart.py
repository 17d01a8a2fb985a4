"""
SVG 图表

SVG 中不写入日期, id 使用固定的哈希盐, 相同输入得到相同文件; 元数据中记录配置哈希与 git describe.
"""
from pathlib import Path
from typing import List
from typing import Optional
from typing import Tuple

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from epimon.alarm import AlarmConfig  # noqa: E402
from epimon.alarm import AlarmReport  # noqa: E402
from epimon.alarm import prediction_band  # noqa: E402
from epimon.alarm import trapezoid_domain  # noqa: E402
from epimon.logger import logger  # noqa: E402
from epimon.segfit import SegmentedFit  # noqa: E402
from epimon.series import LogSeries  # noqa: E402
from epimon.series import ObservationSeries  # noqa: E402
from epimon.utils import git_describe  # noqa: E402

plt.rcParams['svg.hashsalt'] = 'epimon'
plt.rcParams['svg.fonttype'] = 'path'

COLORS = {'adv': 'tab:blue', 'disp': 'tab:red'}
LEVEL_COLORS = {'none': 'tab:green', 'warning': 'gold', 'alarm': 'tab:orange', 'confirmed': 'tab:red'}


def provenance(cfg_hash) -> dict:
    """savefig 的 SVG 元数据"""

    return {'Description': f'config-hash={cfg_hash}; git-describe={git_describe()}', 'Date': None}


def to_datetimes(days, epoch) -> pd.DatetimeIndex:
    """日序号(可为小数)转换为时间戳"""

    return pd.Timestamp(epoch) + pd.to_timedelta(np.asarray(days, dtype=float), unit='D')


def _save(fig, filename, cfg_hash):
    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)

    fig.savefig(filename, format='svg', bbox_inches='tight', metadata=provenance(cfg_hash))
    plt.close(fig)

    logger.info(f'[√] 已写入 {filename}')
    return filename


def fit_chart(logs: LogSeries, fit: SegmentedFit, filename, cfg_hash='', title=None):
    """
    对数坐标下的计数, 拟合折线与断点(点线)

    :param logs: 对数计数
    :param fit: 分段拟合
    :param filename: 输出 svg 路径
    :param cfg_hash: 配置哈希
    :return: Path
    """

    fig, ax = plt.subplots(figsize=(10, 5))

    ax.scatter(to_datetimes(logs.days, logs.epoch), np.exp(logs.values), s=12, color='tab:gray', label=logs.label)

    grid = np.linspace(fit.span[0], fit.span[1], max(200, 4 * len(logs)))
    ax.plot(to_datetimes(grid, logs.epoch), np.exp(fit.evaluate(grid)), color='tab:blue', linewidth=1.8, label=fit.kind)

    for b in fit.breakpoints:
        ax.axvline(to_datetimes([b], logs.epoch)[0], linestyle=':', color='black', linewidth=1)

    for piece in fit.pieces():
        middle = (piece['start'] + piece['end']) / 2
        ax.annotate(
            f'{piece["doubling_time"]:.1f} d',
            (to_datetimes([middle], logs.epoch)[0], float(np.exp(fit.evaluate(middle)))),
            textcoords='offset points',
            xytext=(0, 10),
            ha='center',
            fontsize=9,
        )

    ax.set_yscale('log')
    ax.set_ylabel('count')
    ax.grid(True, alpha=0.3)
    ax.legend(loc='best')
    ax.set_title(title or f'{logs.label}: {len(fit.segments)} lines, loss={fit.loss:.4g}')
    fig.autofmt_xdate()

    return _save(fig, filename, cfg_hash)


def _series_panel(ax, series: ObservationSeries, report: AlarmReport, index, cfg: AlarmConfig, lookback):
    est = report.estimates[index]
    name = ('adv', 'disp')[index]
    color = COLORS[name]

    points = [(d, c) for d, c in series.points if report.as_of - lookback < d <= report.as_of and c > 0]

    if points:
        days, counts = zip(*points)
        ax.plot(to_datetimes(days, series.epoch), counts, marker='.', linewidth=1, color=color, label=series.label)

    band = prediction_band(est, np.arange(report.window[0], report.window[1] + 1), epsilon=cfg.epsilon)
    when = to_datetimes(band['day'], series.epoch)

    ax.fill_between(when, np.exp(band['lower']), np.exp(band['upper']), color=color, alpha=0.12, linewidth=0)

    domain = trapezoid_domain(est, horizon=6, epsilon=cfg.epsilon)
    when = to_datetimes(domain['day'], series.epoch)

    ax.fill_between(when, np.exp(domain['lower']), np.exp(domain['upper']), color=color, alpha=0.35, linewidth=0)
    ax.plot(when, np.exp(domain['center']), linestyle='--', color=color, linewidth=1)


def monitor_figure(
    adv: ObservationSeries,
    disp: ObservationSeries,
    reports: List[Tuple[int, Optional[AlarmReport]]],
    cfg: AlarmConfig,
):
    """
    三栏: 计数与窗口、窗口内的预测带 (浅色) 与向前的梯形预测域 (深色); p⁺ 随时间的变化与阈值; 最后一天的指针

    :param reports: monitor_range 的结果, 单日时只有一项
    :return: matplotlib Figure
    """

    last = next((r for _, r in reversed(reports) if r is not None), None)

    fig, (top, middle, bottom) = plt.subplots(3, 1, figsize=(10, 11), gridspec_kw={'height_ratios': [3, 2, 2]})

    if last is not None:
        lo, hi = to_datetimes(last.window, adv.epoch)
        top.axvspan(lo, hi, color='tab:gray', alpha=0.15, label='window')

        lookback = max(3 * cfg.window_days, reports[-1][0] - reports[0][0] + cfg.window_days)

        for index, series in enumerate((adv, disp)):
            _series_panel(top, series, last, index, cfg, lookback)

        top.set_title(f'{last.level} @ {to_datetimes([last.as_of], adv.epoch)[0].date().isoformat()}', color=LEVEL_COLORS[last.level])

    top.set_yscale('log')
    top.set_ylabel('count')
    top.grid(True, alpha=0.3)
    top.legend(loc='best')

    done = [(d, r) for d, r in reports if r is not None]

    if done:
        when = to_datetimes([d for d, _ in done], adv.epoch)
        middle.plot(when, [r.p_adv_plus for _, r in done], marker='.', color=COLORS['adv'], label='p⁺ adv')
        middle.plot(when, [r.p_disp_plus for _, r in done], marker='.', color=COLORS['disp'], label='p⁺ disp')

    middle.axhline(cfg.theta_warn, linestyle='--', color=LEVEL_COLORS['warning'], linewidth=1)
    middle.axhline(cfg.theta_alarm, linestyle='--', color=LEVEL_COLORS['alarm'], linewidth=1)
    middle.set_ylim(-0.02, 1.02)
    middle.set_ylabel('p⁺')
    middle.grid(True, alpha=0.3)
    middle.legend(loc='best')

    bottom.axhline(0.0, color='black', linewidth=1)

    if last is not None:
        for offset, name in enumerate(('adv', 'disp')):
            needles = last.needles[name]

            for slope, style, theta in ((needles.warn, '--', cfg.theta_warn), (needles.alarm, '-', cfg.theta_alarm)):
                x0 = 2.5 * offset
                bottom.plot([x0, x0 + 1.0], [0.0, slope], linestyle=style, color=COLORS[name], linewidth=2, label=f'{name} ϑ={theta:g}')

        bottom.set_xticks([0.5, 3.0], ['adv', 'disp'])

    bottom.set_ylabel('slope')
    bottom.grid(True, alpha=0.3)
    bottom.legend(loc='best', fontsize=8)

    for ax in (top, middle):
        plt.setp(ax.get_xticklabels(), rotation=30, ha='right')

    fig.tight_layout()

    return fig


def monitor_chart(
    adv: ObservationSeries,
    disp: ObservationSeries,
    reports: List[Tuple[int, Optional[AlarmReport]]],
    cfg: AlarmConfig,
    filename,
    cfg_hash='',
):
    """写出 monitor_figure 的 SVG"""

    return _save(monitor_figure(adv, disp, reports, cfg), filename, cfg_hash)
