"""
分级预警机制

adv(医疗建议)序列提供早期预警, disp(出车)序列用于确认:

- warning:   p⁺_adv ≥ ϑ_warn
- alarm:     p⁺_adv ≥ ϑ_alarm
- confirmed: p⁺_adv ≥ ϑ_alarm 且 p⁺_disp ≥ ϑ_alarm
"""
import math
from dataclasses import dataclass
from dataclasses import field
from typing import Dict
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Tuple

import numpy as np
from tqdm import tqdm

from epimon import config
from epimon.alarm.estimate import SlopeEstimate
from epimon.alarm.estimate import l1_fit
from epimon.alarm.estimate import ols_fit
from epimon.alarm.estimate import pivot_cdf
from epimon.alarm.estimate import pivot_quantile
from epimon.alarm.estimate import slope_positive_probability
from epimon.alarm.estimate import student_quantile
from epimon.compat import Level
from epimon.compat import Mode
from epimon.consts import LEVELS
from epimon.exceptions import EpimonDataError
from epimon.exceptions import EpimonValidationException
from epimon.exceptions import InsufficientDataError
from epimon.logger import logger
from epimon.series import ObservationSeries
from epimon.series import log_transform
from epimon.series import window
from epimon.spectral import doubling_time
from epimon.utils import to_date
from epimon.utils import to_day

MODELS = {'ols': 'gauss-ols', 'l1': 'laplace-l1'}

_KEYS = {
    'THETA_WARN': 'theta_warn',
    'THETA_ALARM': 'theta_alarm',
    'WINDOW': 'window_days',
    'D': 'doubling_threshold_D',
    'EPSILON': 'epsilon',
    'MODEL': 'model',
}


@dataclass(frozen=True)
class AlarmConfig:
    theta_warn: float = 0.25
    theta_alarm: float = 0.75
    window_days: int = 10
    doubling_threshold_D: float = 14.0
    epsilon: float = 0.05
    model: str = 'l1'

    def __post_init__(self):
        if not 0 < self.theta_warn <= self.theta_alarm < 1:
            raise EpimonValidationException(f'需要 0 < ϑ_warn ≤ ϑ_alarm < 1: ({self.theta_warn}, {self.theta_alarm})')

        if int(self.window_days) != self.window_days or self.window_days < 3:
            raise EpimonValidationException(f'窗口天数必须为不小于 3 的整数: {self.window_days}')

        if not self.doubling_threshold_D > 0:
            raise EpimonValidationException(f'倍增时间阈值必须为正: {self.doubling_threshold_D}')

        if not 0 < self.epsilon < 1:
            raise EpimonValidationException(f'ε 必须在 (0, 1) 内: {self.epsilon}')

        if self.model not in MODELS:
            raise EpimonValidationException(f'未知的模型 {self.model!r}, 可选 {tuple(MODELS)}')

    @classmethod
    def from_dict(cls, options=None):
        """
        由 dict 构造, 键可以是字段名或配置文件中的大写键; 缺省项取全局配置 ALARM

        :param options: dict
        :return: AlarmConfig
        """

        values = {name: config.get(f'ALARM.{key}') for key, name in _KEYS.items()}

        for key, value in (options or {}).items():
            name = _KEYS.get(str(key).upper(), key)

            if name not in values:
                logger.debug(f'忽略未知的预警配置项 {key}')
                continue

            values[name] = value

        try:
            return cls(
                float(values['theta_warn']),
                float(values['theta_alarm']),
                int(values['window_days']),
                float(values['doubling_threshold_D']),
                float(values['epsilon']),
                str(values['model']),
            )
        except (TypeError, ValueError) as ex:
            raise EpimonValidationException(f'预警配置无效: {ex}')

    @classmethod
    def from_settings(cls):
        return cls.from_dict()


class Needles(NamedTuple):
    """ϑ_warn 与 ϑ_alarm 分位斜率, 为正即指针在水平线之上"""

    warn: float
    alarm: float


class DeltaIntervals(NamedTuple):
    I1: Tuple[float, float]
    I2: Tuple[float, float]


@dataclass
class AlarmReport:
    as_of: int
    window: Tuple[int, int]
    p_adv_plus: float
    p_disp_plus: float
    level: Level
    doubling_alarm: bool
    estimates: Tuple[SlopeEstimate, SlopeEstimate]
    needles: Dict[str, Needles] = field(default_factory=dict)
    dropped: Dict[str, int] = field(default_factory=dict)
    doubling_level: Level = 'none'
    interval_level: Level = 'none'
    epoch: Optional[str] = None
    labels: Tuple[str, str] = ('adv', 'disp')

    def to_dict(self):
        """可序列化的报告, 日期为 ISO 格式"""

        epoch = self.epoch or config.get('EPOCH')
        series = {}

        for name, est in zip(('adv', 'disp'), self.estimates):
            series[name] = {
                'model': est.model,
                'beta_hat': est.beta_hat,
                'alpha_hat': est.alpha_hat,
                'V': est.V,
                'n': est.n,
                'doubling_time': doubling_time(est.beta_hat),
                'needles': dict(self.needles[name]._asdict()) if name in self.needles else None,
                'dropped': self.dropped.get(name, 0),
            }

        return {
            'as_of': to_date(self.as_of, epoch).isoformat(),
            'window': [to_date(d, epoch).isoformat() for d in self.window],
            'p_adv': self.p_adv_plus,
            'p_disp': self.p_disp_plus,
            'level': self.level,
            'doubling_alarm': self.doubling_alarm,
            'doubling_level': self.doubling_level,
            'interval_level': self.interval_level,
            'labels': list(self.labels),
            'series': series,
        }


def _probability(p, name):
    if not 0 <= p <= 1:
        raise EpimonValidationException(f'{name} 必须在 [0, 1] 内: {p}')

    return p


def alarm_level(p_adv, p_disp, cfg: AlarmConfig = None) -> Level:
    """
    由两个 p⁺ 得到预警级别

    :param p_adv: adv 序列的 p⁺
    :param p_disp: disp 序列的 p⁺
    :param cfg: AlarmConfig
    :return: none | warning | alarm | confirmed
    """

    cfg = cfg or AlarmConfig.from_settings()

    _probability(p_adv, 'p_adv')
    _probability(p_disp, 'p_disp')

    if p_adv < cfg.theta_warn:
        return 'none'

    if p_adv < cfg.theta_alarm:
        return 'warning'

    return 'confirmed' if p_disp >= cfg.theta_alarm else 'alarm'


def _one_sided(est: SlopeEstimate, epsilon):
    if not 0 < epsilon < 1:
        raise EpimonValidationException(f'ε 必须在 (0, 1) 内: {epsilon}')

    return pivot_quantile(est, 1.0 - epsilon), math.sqrt(max(est.V, 0.0))


def doubling_time_alarm(est: SlopeEstimate, D=14.0, epsilon=0.05, mode: Mode = 'false-positive') -> bool:
    """
    倍增时间不超过 D 的告警

    false-positive: ln2/D < β̂ - q√V; false-negative: ln2/D < β̂ + q√V, q 为 1-ε 分位数

    :return: bool
    """

    if not D > 0:
        raise EpimonValidationException(f'D 必须为正: {D}')

    if mode not in ('false-positive', 'false-negative'):
        raise EpimonValidationException(f'未知的模式 {mode!r}')

    q, sd = _one_sided(est, epsilon)
    threshold = math.log(2) / D

    if mode == 'false-positive':
        return threshold < est.beta_hat - q * sd

    return threshold < est.beta_hat + q * sd


def doubling_odds(est: SlopeEstimate, D=14.0) -> float:
    """P(β > ln2/D), 即倍增时间短于 D 的概率"""

    if not D > 0:
        raise EpimonValidationException(f'D 必须为正: {D}')

    threshold = math.log(2) / D

    if not est.V > 0:
        return 1.0 if est.beta_hat > threshold else (0.5 if est.beta_hat == threshold else 0.0)

    return float(pivot_cdf(est, (est.beta_hat - threshold) / math.sqrt(est.V)))


def doubling_level(adv: SlopeEstimate, disp: SlopeEstimate, D=14.0) -> Level:
    """两阶段的 D 阈值告警: adv 触发为 alarm, disp 同时触发为 confirmed"""

    if doubling_odds(adv, D) < 0.5:
        return 'none'

    return 'confirmed' if doubling_odds(disp, D) >= 0.5 else 'alarm'


def delta_confidence(est: SlopeEstimate, epsilon=0.05) -> DeltaIntervals:
    """
    倍增时间 δ 的两个单侧置信区间

    I₁ = [0, ln2/(β̂ - q√V)] (β̂ - q√V ≤ 0 时为 [0, +∞)),
    I₂ = [ln2/(β̂ + q√V), +∞) (β̂ + q√V ≤ 0 时为 [+∞, +∞))
    """

    q, sd = _one_sided(est, epsilon)
    lower, upper = est.beta_hat - q * sd, est.beta_hat + q * sd

    I1 = (0.0, math.log(2) / lower) if lower > 0 else (0.0, math.inf)
    I2 = (math.log(2) / upper, math.inf) if upper > 0 else (math.inf, math.inf)

    return DeltaIntervals(I1, I2)


def slope_needles(est: SlopeEstimate, cfg: AlarmConfig = None) -> Needles:
    """指针斜率 β̂ + √V F⁻¹(1 - ϑ), 为正当且仅当 p⁺ ≥ ϑ"""

    cfg = cfg or AlarmConfig.from_settings()
    sd = math.sqrt(max(est.V, 0.0))

    return Needles(
        est.beta_hat + sd * pivot_quantile(est, 1.0 - cfg.theta_warn),
        est.beta_hat + sd * pivot_quantile(est, 1.0 - cfg.theta_alarm),
    )


def interval_alarm_level(adv: SlopeEstimate, disp: SlopeEstimate, epsilon=0.05) -> Level:
    """基于置信区间端点的等价机制: 上界 ≥ 0 为 warning, 下界 ≥ 0 为 alarm"""

    def bounds(est):
        q = pivot_quantile(est, 1.0 - epsilon / 2.0)
        sd = math.sqrt(max(est.V, 0.0))
        return est.beta_hat - q * sd, est.beta_hat + q * sd

    adv_lo, adv_hi = bounds(adv)

    if adv_hi < 0:
        return 'none'

    if adv_lo < 0:
        return 'warning'

    return 'confirmed' if bounds(disp)[0] >= 0 else 'alarm'


def _as_day(value, epoch):
    if value is None or isinstance(value, (int, np.integer)):
        return value

    return to_day(value, epoch)


def fit_window(series: ObservationSeries, cfg: AlarmConfig, as_of, model=None):
    """
    截取窗口, 取对数并估计斜率

    :return: (SlopeEstimate, dropped)
    """

    logs = window(series, cfg.window_days, as_of)

    try:
        logs = log_transform(logs)
    except EpimonDataError as ex:
        raise InsufficientDataError(str(ex), data={'as_of': as_of})

    if len(logs) < 3:
        raise InsufficientDataError(f'{series.label}: 窗口内只有 {len(logs)} 个正计数日', data={'as_of': as_of})

    fit = ols_fit if (model or cfg.model) == 'ols' else l1_fit
    return fit(logs.x, logs.values), logs.dropped


def monitor(adv: ObservationSeries, disp: ObservationSeries, cfg: AlarmConfig = None, as_of=None, model=None) -> AlarmReport:
    """
    在 as_of 当天评估预警级别

    :param adv: 医疗建议序列
    :param disp: 出车序列
    :param cfg: AlarmConfig
    :param as_of: 日序号或日期, 默认取两个序列共同的最后一天
    :param model: 'l1' 或 'ols', 默认取 cfg.model
    :return: AlarmReport
    """

    cfg = cfg or AlarmConfig.from_settings()
    model = model or cfg.model

    if model not in MODELS:
        raise EpimonValidationException(f'未知的模型 {model!r}, 可选 {tuple(MODELS)}')

    if adv.epoch != disp.epoch:
        raise EpimonValidationException(f'序列的 epoch 不一致: {adv.epoch} != {disp.epoch}')

    as_of = _as_day(as_of, adv.epoch)

    if as_of is None:
        if not len(adv) or not len(disp):
            raise InsufficientDataError('序列为空')

        as_of = min(adv.days[-1], disp.days[-1])

    est_adv, drop_adv = fit_window(adv, cfg, as_of, model)
    est_disp, drop_disp = fit_window(disp, cfg, as_of, model)

    p_adv = slope_positive_probability(est_adv)
    p_disp = slope_positive_probability(est_disp)
    level = alarm_level(p_adv, p_disp, cfg)

    logger.debug(f'{to_date(as_of, adv.epoch)}: p_adv={p_adv:.3f}, p_disp={p_disp:.3f}, {level}')

    return AlarmReport(
        as_of,
        (as_of - cfg.window_days + 1, as_of),
        p_adv,
        p_disp,
        level,
        doubling_odds(est_adv, cfg.doubling_threshold_D) >= 0.5,
        (est_adv, est_disp),
        {'adv': slope_needles(est_adv, cfg), 'disp': slope_needles(est_disp, cfg)},
        {'adv': drop_adv, 'disp': drop_disp},
        doubling_level(est_adv, est_disp, cfg.doubling_threshold_D),
        interval_alarm_level(est_adv, est_disp, cfg.epsilon),
        adv.epoch,
        (adv.label, disp.label),
    )


def monitor_range(
    adv: ObservationSeries,
    disp: ObservationSeries,
    cfg: AlarmConfig = None,
    start=None,
    end=None,
    model=None,
    progress=False,
) -> List[Tuple[int, Optional[AlarmReport]]]:
    """
    对 [start, end] 内的每一天运行 monitor, 数据不足的日期记为 None; start 默认取第一个完整窗口的最后一天

    :return: [(day, AlarmReport 或 None)]
    """

    cfg = cfg or AlarmConfig.from_settings()
    start = _as_day(start, adv.epoch)
    end = _as_day(end, adv.epoch)

    start = max(adv.days[0], disp.days[0]) + cfg.window_days - 1 if start is None else start
    end = min(adv.days[-1], disp.days[-1]) if end is None else end

    if end < start:
        raise EpimonValidationException(f'结束日期早于开始日期: {end} < {start}')

    results = []

    for day in tqdm(range(start, end + 1), disable=not progress, ascii=True, desc='monitor'):
        try:
            results.append((day, monitor(adv, disp, cfg, day, model)))
        except InsufficientDataError as ex:
            logger.warning(f'{to_date(day, adv.epoch)}: 数据不足, {ex}')
            results.append((day, None))

    return results


@dataclass(frozen=True)
class CoverageResult:
    kind: str
    reps: int
    hits: int

    @property
    def coverage(self):
        return self.hits / self.reps


def coverage_experiment(kind='beta-gauss', n=10, reps=10000, epsilon=0.05, noise=0.2, seed=0) -> CoverageResult:
    """
    置信区间覆盖率的蒙特卡洛实验

    - beta-gauss: 高斯噪声下最小二乘 β 区间覆盖真值的比例
    - delta-laplace: Laplace 噪声下最小一乘 I₁ 覆盖真实倍增时间 10 天的比例

    :param kind: 实验类型
    :param n: 每次的样本点数
    :param reps: 重复次数
    :param epsilon: ε
    :param noise: 噪声标准差(高斯)或尺度(Laplace)
    :param seed: 随机种子
    :return: CoverageResult
    """

    rng = np.random.default_rng(seed)
    x = np.arange(n, dtype=float)

    if kind == 'beta-gauss':
        beta = 0.1
        z = 1.0 + beta * x[None, :] + rng.normal(0.0, noise, size=(reps, n))

        x_bar = x.mean()
        sxx = float(np.sum((x - x_bar) ** 2))
        beta_hat = (z - z.mean(axis=1, keepdims=True)) @ (x - x_bar) / sxx
        alpha_hat = z.mean(axis=1) - beta_hat * x_bar
        sigma2 = np.sum((z - alpha_hat[:, None] - beta_hat[:, None] * x[None, :]) ** 2, axis=1) / (n - 2)

        q = student_quantile(1.0 - epsilon / 2.0, n - 2)
        hits = int(np.sum(np.abs(beta_hat - beta) <= q * np.sqrt(sigma2 / sxx)))
    elif kind == 'delta-laplace':
        beta = math.log(2) / 10.0
        z = 1.0 + beta * x[None, :] + rng.laplace(0.0, noise, size=(reps, n))

        hits = 0

        for row in z:
            I1 = delta_confidence(l1_fit(x, row), epsilon).I1
            hits += I1[0] <= 10.0 <= I1[1]
    else:
        raise EpimonValidationException(f'未知的实验类型 {kind!r}')

    logger.debug(f'{kind}: 覆盖率 {hits / reps:.4f} ({reps} 次)')
    return CoverageResult(kind, reps, int(hits))


__all__ = [
    'AlarmConfig',
    'AlarmReport',
    'CoverageResult',
    'DeltaIntervals',
    'LEVELS',
    'Needles',
    'alarm_level',
    'coverage_experiment',
    'delta_confidence',
    'doubling_level',
    'doubling_odds',
    'doubling_time_alarm',
    'fit_window',
    'interval_alarm_level',
    'monitor',
    'monitor_range',
    'slope_needles',
]
