"""
内置的合成数据

- 两阶段计数序列(分段拟合)
- 复燃场景: 由纯延迟观测的 PDE 模拟生成 adv(延迟 5 天)与 disp = EMT + MICU(延迟 12 天)
- 衰退场景: 单阶段衰退, 噪声较小
- 闭式模型场景(ψ≡1, K≡0, x_E*=3, x_I*=7)
"""
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from epimon.engine import simulate
from epimon.engine import observe
from epimon.model import DensityState
from epimon.model import ModelParams
from epimon.model import ObservableKernel
from epimon.series import ObservationSeries
from epimon.series import aggregate
from epimon.spectral import characteristic_value
from epimon.spectral import eigenvector
from epimon.utils import write_json


class MonitorFixture(NamedTuple):
    adv: ObservationSeries
    disp: ObservationSeries
    emt: ObservationSeries
    micu: ObservationSeries


RESURGENCE = {
    'decay': -0.08,  # 初始增长率(1/天)
    'growth': 0.06,  # 复燃后的增长率
    'ramp_start': 25,  # μ 开始上升的日期
    'ramp_days': 50,  # μ 几何上升的天数
    'days': 110,
    'level': 2000.0,  # 第 0 天 adv 的期望计数
    'disp_level': 1500.0,
    'micu_share': 0.1,
}

ADV_TAU = 5.0
DISP_TAU = 12.0


def closed_form_params(mu=1 / 7, h=None) -> ModelParams:
    """ψ≡1, K≡0, x_E*=3, x_I*=7 的闭式模型, G⁰ = 7"""

    return ModelParams.factory(3.0, 7.0, h, 0.0, 0.0, 1.0, mu=mu)


def closed_form_scenario(mu=1 / 7, h=0.05, horizon=60) -> dict:
    """闭式模型的场景配置"""

    return {
        'name': 'closed-form',
        'grid': {'h': h, 'dt': h},
        'horizon': horizon,
        'nonlinear': False,
        'params': {'x_E_star': 3.0, 'x_I_star': 7.0, 'K_EI': 0.0, 'K_IR': 0.0, 'psi': 1.0, 'mu_schedule': [[0, mu]]},
        'init': {'S': 0.0, 'R': 0.0, 'n_E': 0.0, 'n_I': {'type': 'triangular', 'center': 1.0, 'width': 2.0, 'height': 1.0}},
        'kernel': {'weights': 1.0},
    }


def delay_params(h=0.1, mu_schedule=None) -> ModelParams:
    """纯延迟观测所用的模型: x_E*=3, x_I*=10, ψ≡1"""

    return ModelParams.factory(3.0, 10.0, h, 0.0, 0.0, 1.0, mu=0.0, mu_schedule=mu_schedule)


def mu_for(params: ModelParams, lam) -> float:
    """使 Perron 特征值等于 λ 的 μ = 1/G^λ"""

    return 1.0 / characteristic_value(params, lam)


def _contaminated(rng, n, clean, shock=0.0, rate=0.0):
    """Laplace 噪声, 以概率 rate 叠加尺度为 shock 的 Laplace 冲击"""

    noise = rng.laplace(0.0, clean, n)

    if rate > 0:
        noise += np.where(rng.random(n) < rate, rng.laplace(0.0, shock, n), 0.0)

    return noise


def _delay_values(params, lam0, days):
    solution = eigenvector(params, lam0)
    init = DensityState(params.h, solution.n_E, solution.n_I)

    trajectory = simulate(params, init, days - 1, dt=params.h)

    adv = ObservableKernel.pure_delay(params, 1.0, ADV_TAU)
    disp = ObservableKernel.pure_delay(params, 1.0, DISP_TAU)

    return np.array([observe(s, adv) for s in trajectory.states]), np.array([observe(s, disp) for s in trajectory.states])


def _counts(label, values, level, noise, epoch):
    expected = level * values / values[0]
    counts = np.rint(expected * np.exp(noise)).astype(int)
    return ObservationSeries(label, range(len(counts)), counts.tolist(), epoch)


def resurgence_fixture(seed=0, epoch=None, **options) -> MonitorFixture:
    """
    复燃场景: 先以 RESURGENCE['decay'] 衰退, 然后 μ 几何上升至增长率 RESURGENCE['growth'];
    disp 比 adv 晚 7 天看到同一条接触曲线

    :param seed: 随机种子
    :param epoch: 第 0 天的日期
    :return: MonitorFixture
    """

    opts = {**RESURGENCE, **options}
    rng = np.random.default_rng(seed)
    base = delay_params()

    mu1, mu2 = mu_for(base, opts['decay']), mu_for(base, opts['growth'])
    ratio = mu2 / mu1
    schedule = [(0.0, mu1)] + [
        (float(opts['ramp_start'] + k - 1), mu1 * ratio ** (k / opts['ramp_days'])) for k in range(1, opts['ramp_days'] + 1)
    ]

    days = opts['days']
    y_adv, y_disp = _delay_values(delay_params(mu_schedule=schedule), opts['decay'], days)

    adv = _counts('adv', y_adv, opts['level'], _contaminated(rng, days, 0.02, 0.5, 0.3), epoch)
    share = opts['micu_share']
    emt = _counts('emt', y_disp, opts['disp_level'] * (1 - share), _contaminated(rng, days, 0.02, 0.3, 0.2), epoch)
    micu = _counts('micu', y_disp, opts['disp_level'] * share, _contaminated(rng, days, 0.05), epoch)

    return MonitorFixture(adv, aggregate([emt, micu], label='disp'), emt, micu)


def decaying_fixture(seed=0, epoch=None, decay=-0.05, days=90) -> MonitorFixture:
    """单阶段衰退场景, Laplace 噪声尺度 0.02"""

    rng = np.random.default_rng(seed)
    params = delay_params(mu_schedule=[(0.0, mu_for(delay_params(), decay))])

    y_adv, y_disp = _delay_values(params, decay, days)

    adv = _counts('adv', y_adv, 5000.0, _contaminated(rng, days, 0.02), epoch)
    emt = _counts('emt', y_disp, 3600.0, _contaminated(rng, days, 0.02), epoch)
    micu = _counts('micu', y_disp, 400.0, _contaminated(rng, days, 0.02), epoch)

    return MonitorFixture(adv, aggregate([emt, micu], label='disp'), emt, micu)


def two_phase_series(seed=0, days=41, break_day=20, slopes=(0.1, -0.06), level=500.0, noise=0.03, epoch=None) -> ObservationSeries:
    """
    两阶段计数序列, 对数斜率在 break_day 由 slopes[0] 变为 slopes[1]

    :return: ObservationSeries
    """

    rng = np.random.default_rng(seed)
    t = np.arange(days, dtype=float)
    z = math.log(level) + np.where(t < break_day, slopes[0] * t, slopes[0] * break_day + slopes[1] * (t - break_day))

    counts = np.rint(np.exp(z + rng.laplace(0.0, noise, days))).astype(int)
    return ObservationSeries('two-phase', range(days), counts.tolist(), epoch)


def alarm_options() -> dict:
    return {'THETA_WARN': 0.25, 'THETA_ALARM': 0.75, 'WINDOW': 10, 'D': 14, 'EPSILON': 0.05, 'MODEL': 'l1'}


def bundle(output, seed=0, epoch=None):
    """
    把全部内置数据写入目录

    :param output: 输出目录
    :param seed: 随机种子
    :param epoch: 第 0 天的日期
    :return: 写入的文件列表
    """

    output = Path(output)
    output.mkdir(parents=True, exist_ok=True)

    files = []
    series = {'two_phase': two_phase_series(seed, epoch=epoch)}

    for name, fixture in (('resurgence', resurgence_fixture(seed, epoch)), ('decaying', decaying_fixture(seed, epoch))):
        for part in MonitorFixture._fields:
            series[f'{name}_{part}'] = getattr(fixture, part)

    for name, s in series.items():
        filename = output / f'{name}.csv'
        filename.write_text(s.to_csv(), encoding='utf-8')
        files.append(filename)

    files.append(write_json(closed_form_scenario(), output / 'closed_form.json'))
    files.append(write_json(alarm_options(), output / 'alarm.json'))

    return files
