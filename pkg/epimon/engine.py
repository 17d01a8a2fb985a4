"""输运偏微分方程的显式迎风格式, 观测量与经典 SEIR 常微分方程"""
import math
from dataclasses import dataclass
from dataclasses import field
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from tqdm import tqdm

from epimon import config
from epimon.exceptions import EpimonNumericalError
from epimon.exceptions import EpimonValidationException
from epimon.logger import logger
from epimon.model import DensityState
from epimon.model import ModelParams
from epimon.model import ObservableKernel
from epimon.model import ages
from epimon.series import LogSeries
from epimon.series import ObservationSeries
from epimon.utils import frame_dates


def _check(state: DensityState, params: ModelParams, dt):
    if not dt > 0:
        raise EpimonValidationException(f'时间步长必须为正: dt={dt}')

    if dt > params.h * (1 + 1e-12):
        raise EpimonValidationException(f'违反 CFL 条件: dt={dt} > h={params.h}')

    if abs(state.h - params.h) > 1e-12 or state.n_E.size != params.m_E or state.n_I.size != params.m_I:
        raise EpimonValidationException('状态网格与模型参数不一致')


def _transport(n, rate, inflow, c, dt, h):
    """
    单个仓室一步: 迎风平移后沿特征线乘以 exp(-K dt)

    :return: (新密度, 衰减移出的质量, 越过最大年龄的质量)
    """

    if not n.size:
        return n, 0.0, dt * inflow

    upwind = np.empty_like(n)
    upwind[0] = inflow
    upwind[1:] = n[:-1]

    u = (1.0 - c) * n + c * upwind
    lost = -np.expm1(-rate * dt)

    return u * (1.0 - lost), h * float(np.dot(u, lost)), dt * float(n[-1])


def inflow(state: DensityState, params: ModelParams, mu, nonlinear=False):
    """
    接触流入边界密度 n_E(0, t) = μ (S/N) ∫ ψ n_I

    :param nonlinear: False 时取 S/N = 1
    """

    force = mu * params.h * float(np.dot(params.psi, state.n_I))

    if nonlinear:
        total = state.N
        force = force * state.S / total if total > 0 else 0.0

    return force


def _advance(state: DensityState, params: ModelParams, dt, mu, nonlinear):
    h = params.h
    c = min(dt / h, 1.0)

    b_E = inflow(state, params, mu, nonlinear)
    S = state.S

    if nonlinear:
        exposed = min(dt * b_E, S)
        b_E = exposed / dt
        S = S - exposed

    n_E, removed_E, out_E = _transport(state.n_E, params.K_EI, b_E, c, dt, h)
    b_I = (removed_E + out_E) / dt
    n_I, removed_I, out_I = _transport(state.n_I, params.K_IR, b_I, c, dt, h)

    return DensityState(h, n_E, n_I, S, state.R + removed_I + out_I, state.t + dt)


def step_linear(state: DensityState, params: ModelParams, dt, mu=None) -> DensityState:
    """
    线性化系统的一步(S/N ≃ 1, S 保持不变)

    :param state: 当前状态
    :param params: 模型参数
    :param dt: 时间步长, 需满足 dt ≤ h
    :param mu: 本步的 μ, 默认取 params.mu_at(state.t)
    :return: 新状态
    """

    _check(state, params, dt)
    return _advance(state, params, dt, params.mu_at(state.t) if mu is None else mu, False)


def step_nonlinear(state: DensityState, params: ModelParams, dt, mu=None) -> DensityState:
    """完整非线性系统的一步, 流入按 S/N 缩放并消耗 S"""

    _check(state, params, dt)
    return _advance(state, params, dt, params.mu_at(state.t) if mu is None else mu, True)


def observe(state: DensityState, kernel: ObservableKernel) -> float:
    """
    观测值 ∫ n_I dκ: 权重部分按单元求积, 点质量处对 n_I 线性插值

    :param state: 状态
    :param kernel: 观测核
    :return: float
    """

    m = state.n_I.size

    if kernel.weights.size != m:
        raise EpimonValidationException(f'观测核长度 {kernel.weights.size} 与 n_I 网格 {m} 不一致')

    value = state.h * float(np.dot(kernel.weights, state.n_I))

    if kernel.point_masses:
        centres = ages(m, state.h)

        for x, mass in kernel.point_masses:
            if x > m * state.h + 1e-9:
                raise EpimonValidationException(f'点质量年龄 {x} 超出 [0, x_I*]')

            value += mass * float(np.interp(x, centres, state.n_I))

    return value


@dataclass
class Trajectory:
    """模拟结果: 每个输出日的状态与观测值"""

    times: List[float]
    states: List[DensityState]
    values: List[float]
    snaps: List[Tuple[float, float]] = field(default_factory=list)
    epoch: Optional[str] = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]

    def to_frame(self) -> pd.DataFrame:
        """t,S,E,I,R,Y 表格, t 为 ISO 日期"""

        return pd.DataFrame(
            {
                'S': [s.S for s in self.states],
                'E': [s.E for s in self.states],
                'I': [s.I for s in self.states],
                'R': [s.R for s in self.states],
                'Y': self.values,
            },
            index=frame_dates(self.times, self.epoch or config.get('EPOCH')).rename('t'),
        ).reset_index()

    def log_series(self, label='Y') -> LogSeries:
        """观测值的对数序列, 跳过非正值"""

        points = [(int(round(t)), math.log(y)) for t, y in zip(self.times, self.values) if y > 0]
        return LogSeries(label, [p[0] for p in points], [p[1] for p in points], self.epoch)

    def counts(self, label='Y', scale=1.0, noise=None) -> ObservationSeries:
        """
        四舍五入得到计数序列

        :param scale: 乘性系数
        :param noise: 与输出日等长的对数噪声
        """

        values = np.asarray(self.values, dtype=float) * scale

        if noise is not None:
            values = values * np.exp(np.asarray(noise, dtype=float))

        days = [int(round(t)) for t in self.times]
        return ObservationSeries(label, days, np.rint(values).astype(int).tolist(), self.epoch)


def simulate(
    params: ModelParams,
    init: DensityState,
    horizon,
    dt=None,
    kernel: ObservableKernel = None,
    nonlinear=False,
    progress=False,
    epoch=None,
) -> Trajectory:
    """
    按 μ 计划切换半群, 逐步推进并在最接近每个整数日的时间步记录观测值, 记录的时间为该步的实际时刻 t0 + k dt

    :param params: 模型参数
    :param init: 初始状态
    :param horizon: 模拟天数, 0 时只返回初始状态
    :param dt: 时间步长, 默认取配置 GRID.DT
    :param kernel: 观测核, 默认单位权重(即 I(t))
    :param nonlinear: 是否使用完整非线性系统
    :param progress: 是否显示进度条
    :param epoch: 第 0 天的日期
    :return: Trajectory
    """

    dt = float(dt or config.get('GRID.DT'))

    if horizon < 0 or not math.isfinite(horizon):
        raise EpimonValidationException(f'模拟天数必须非负: {horizon}')

    _check(init, params, dt)

    kernel = kernel or ObservableKernel.unit(params)
    steps = int(round(horizon / dt))
    t0 = init.t

    # μ 切换时刻对齐到最近的时间步
    switches, snaps = [], []

    for start, mu in params.mu_schedule:
        k = int(round((start - t0) / dt))
        switches.append((k, mu))
        snaps.append((start, t0 + k * dt))

        if abs(t0 + k * dt - start) > 1e-9:
            logger.debug(f'μ 切换时刻 {start} 对齐到 {t0 + k * dt:.6g}')

    record = {int(round(d / dt)): d for d in range(int(math.floor(horizon + 1e-9)) + 1)}

    state = init.copy()
    times, states, values = [t0], [state], [observe(state, kernel)]

    mu = switches[0][1]
    index = 0

    for k in tqdm(range(steps), disable=not progress, ascii=True, desc='simulate'):
        while index < len(switches) and switches[index][0] <= k:
            mu = switches[index][1]
            index += 1

        state = _advance(state, params, dt, mu, nonlinear)
        state.t = t0 + (k + 1) * dt

        if not np.all(np.isfinite(state.n_I)) or not math.isfinite(state.R):
            raise EpimonNumericalError(f'第 {k + 1} 步出现非有限值')

        if k + 1 in record and record[k + 1] > 0:
            if abs((k + 1) * dt - record[k + 1]) > 1e-9:
                logger.debug(f'第 {record[k + 1]} 天记录于 t={state.t:.6g}')

            times.append(state.t)
            states.append(state)
            values.append(observe(state, kernel))

    return Trajectory(times, states, values, snaps, epoch)


def step_matrix(params: ModelParams, dt=None, mu=None) -> np.ndarray:
    """
    线性一步在 (n_E, n_I) 拼接向量上的矩阵, 非负且 (A - I)/dt 为 Metzler 矩阵

    :param params: 模型参数
    :param dt: 时间步长
    :param mu: μ, 默认取 params.mu_at(0)
    :return: np.ndarray
    """

    dt = float(dt or config.get('GRID.DT'))
    mu = params.mu_at(0.0) if mu is None else mu

    size = params.size
    matrix = np.zeros((size, size))
    base = DensityState.zeros(params)

    _check(base, params, dt)

    for k in range(size):
        unit = np.zeros(size)
        unit[k] = 1.0
        matrix[:, k] = _advance(DensityState.from_vector(params, unit), params, dt, mu, False).vector()

    return matrix


def seir_ode(rates, init, horizon, dt=1.0) -> pd.DataFrame:
    """
    经典 SEIR 常微分方程, 以自适应 Runge-Kutta 4(5) (Dormand-Prince, rtol 1e-10) 积分

    S' = -K_IE S I / N, E' = K_IE S I / N - K_EI E, I' = K_EI E - K_IR I, R' = K_IR I

    :param rates: (K_IE, K_EI, K_IR), 均为正
    :param init: (S, E, I, R), 均非负
    :param horizon: 天数
    :param dt: 输出间隔
    :return: pd.DataFrame, 列 t,S,E,I,R
    """

    k_ie, k_ei, k_ir = (float(r) for r in rates)
    y0 = np.asarray(init, dtype=float)

    if min(k_ie, k_ei, k_ir) <= 0:
        raise EpimonValidationException(f'SEIR 速率必须为正: {rates}')

    if y0.shape != (4,) or np.any(y0 < 0):
        raise EpimonValidationException(f'SEIR 初值必须为 4 个非负数: {init}')

    if horizon < 0 or dt <= 0:
        raise EpimonValidationException('horizon 必须非负, dt 必须为正')

    def rhs(_, y):
        s, e, i, r = y
        n = s + e + i + r
        force = k_ie * s * i / n if n > 0 else 0.0
        return [-force, force - k_ei * e, k_ei * e - k_ir * i, k_ir * i]

    t_eval = np.arange(0.0, horizon + dt / 2, dt)

    if horizon == 0:
        return pd.DataFrame([[0.0, *y0]], columns=['t', 'S', 'E', 'I', 'R'])

    sol = solve_ivp(rhs, (0.0, float(t_eval[-1])), y0, method='RK45', t_eval=t_eval, rtol=1e-10, atol=1e-12 * max(1.0, y0.sum()))

    if not sol.success:
        raise EpimonNumericalError(f'SEIR 积分失败: {sol.message}')

    return pd.DataFrame({'t': sol.t, 'S': sol.y[0], 'E': sol.y[1], 'I': sol.y[2], 'R': sol.y[3]})


def seir_metzler(rates) -> np.ndarray:
    """S/N = 1 时 (E, I) 的线性化生成矩阵"""

    k_ie, k_ei, k_ir = (float(r) for r in rates)
    return np.array([[-k_ei, k_ie], [k_ei, -k_ir]])


def seir_growth_rate(rates) -> float:
    """线性化 SEIR 的主特征值(闭式解)"""

    k_ie, k_ei, k_ir = (float(r) for r in rates)
    return 0.5 * (-(k_ei + k_ir) + math.sqrt((k_ei - k_ir) ** 2 + 4.0 * k_ei * k_ie))
