"""输运偏微分方程模型的参数, 状态与观测核

年龄区间 [0, x*] 被划分为步长 h 的网格单元, 第 j 个单元的代表年龄为 (j + 1/2) h.
速率函数与初始剖面都以单元上的取值(分段常数)给出.
"""
import copy
import math
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from epimon import config
from epimon.exceptions import EpimonValidationException
from epimon.logger import logger
from epimon.utils import as_date
from epimon.utils import read_json
from epimon.utils import to_day


def grid_size(length, h, name='x*'):
    """区间长度对应的网格单元数, 长度必须是 h 的整数倍"""

    if h <= 0 or not math.isfinite(h):
        raise EpimonValidationException(f'网格步长必须为正: h={h}')

    if length < 0 or not math.isfinite(length):
        raise EpimonValidationException(f'{name} 必须非负: {length}')

    m = int(round(length / h))

    if abs(m * h - length) > 1e-9 * max(1.0, length):
        raise EpimonValidationException(f'{name}={length} 不是网格步长 h={h} 的整数倍')

    return m


def ages(m, h):
    """单元中心年龄"""

    return (np.arange(m) + 0.5) * h


def sample(spec, m, h, name='profile'):
    """
    把配置中的函数描述采样到网格上

    :param spec: 常数; 网格取值列表; {'type': 'constant'|'triangular'|'table', ...}
    :param m: 单元数
    :param h: 网格步长
    :param name: 名称, 用于报错
    :return: np.ndarray
    """

    x = ages(m, h)

    if spec is None:
        values = np.zeros(m)
    elif isinstance(spec, (int, float)) and not isinstance(spec, bool):
        values = np.full(m, float(spec))
    elif isinstance(spec, dict):
        kind = spec.get('type', 'table')

        if kind == 'constant':
            values = np.full(m, float(spec.get('value', 0.0)))
        elif kind == 'triangular':
            center, width, height = float(spec['center']), float(spec['width']), float(spec.get('height', 1.0))

            if width <= 0:
                raise EpimonValidationException(f'{name}: 三角脉冲宽度必须为正')

            values = height * np.clip(1.0 - np.abs(x - center) / (width / 2.0), 0.0, None)
        elif kind == 'table':
            table_x = np.asarray(spec['ages'], dtype=float)
            table_y = np.asarray(spec['values'], dtype=float)

            if table_x.shape != table_y.shape or table_x.size == 0 or np.any(np.diff(table_x) <= 0):
                raise EpimonValidationException(f'{name}: 表格的 ages 必须严格递增且与 values 等长')

            values = np.interp(x, table_x, table_y)
        else:
            raise EpimonValidationException(f'{name}: 未知的函数类型 {kind!r}')
    else:
        values = np.asarray(spec, dtype=float).ravel()

        if values.size != m:
            raise EpimonValidationException(f'{name}: 需要 {m} 个网格取值, 实际 {values.size}')

    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise EpimonValidationException(f'{name}: 取值必须有限且非负')

    return values.astype(float)


@dataclass
class ModelParams:
    """模型参数 x_E*, x_I*, K_{E→I}, K_{I→R}, ψ 与控制 μ(t)"""

    x_E_star: float
    x_I_star: float
    h: float
    K_EI: np.ndarray
    K_IR: np.ndarray
    psi: np.ndarray
    mu_schedule: List[Tuple[float, float]] = field(default_factory=lambda: [(0.0, 0.0)])

    def __post_init__(self):
        if self.x_I_star <= 0:
            raise EpimonValidationException(f'x_I* 必须为正: {self.x_I_star}')

        self.m_E = grid_size(self.x_E_star, self.h, 'x_E*')
        self.m_I = grid_size(self.x_I_star, self.h, 'x_I*')

        self.K_EI = sample(self.K_EI, self.m_E, self.h, 'K_EI')
        self.K_IR = sample(self.K_IR, self.m_I, self.h, 'K_IR')
        self.psi = sample(self.psi, self.m_I, self.h, 'psi')

        if not np.any(self.psi > 0):
            raise EpimonValidationException('psi 不能恒为零')

        schedule = [(float(s), float(mu)) for s, mu in self.mu_schedule]

        if not schedule or schedule[0][0] != 0.0:
            raise EpimonValidationException('μ 计划必须从时刻 0 开始')

        if any(b[0] <= a[0] for a, b in zip(schedule, schedule[1:])):
            raise EpimonValidationException('μ 计划的起始时刻必须严格递增')

        if any(mu < 0 or not math.isfinite(mu) for _, mu in schedule):
            raise EpimonValidationException('μ 必须非负且有限')

        self.mu_schedule = schedule

    @classmethod
    def factory(cls, x_E_star, x_I_star, h=None, K_EI=0.0, K_IR=0.0, psi=1.0, mu=None, mu_schedule=None):
        """
        参数工厂, 函数参数可为常数, 网格取值或表格

        :param mu: 单阶段 μ, 与 mu_schedule 二选一
        """

        h = h or config.get('GRID.H')

        if mu_schedule is None:
            mu_schedule = [(0.0, 0.0 if mu is None else mu)]

        return cls(float(x_E_star), float(x_I_star), float(h), K_EI, K_IR, psi, mu_schedule)

    @property
    def ages_E(self):
        return ages(self.m_E, self.h)

    @property
    def ages_I(self):
        return ages(self.m_I, self.h)

    @property
    def size(self):
        return self.m_E + self.m_I

    @property
    def span(self):
        """接触到移出的最长时间 x_E* + x_I*"""

        return self.x_E_star + self.x_I_star

    def mu_at(self, t):
        """时刻 t 生效的 μ"""

        mu = self.mu_schedule[0][1]

        for start, value in self.mu_schedule:
            if start <= t + 1e-12:
                mu = value
            else:
                break

        return mu

    def with_mu(self, mu):
        """同一模型的单阶段副本"""

        other = copy.copy(self)
        other.mu_schedule = [(0.0, float(mu))]
        return other


@dataclass
class DensityState:
    """离散化的 n_E, n_I 密度以及 S, R"""

    h: float
    n_E: np.ndarray
    n_I: np.ndarray
    S: float = 0.0
    R: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        self.n_E = np.asarray(self.n_E, dtype=float).ravel()
        self.n_I = np.asarray(self.n_I, dtype=float).ravel()
        self.S = float(self.S)
        self.R = float(self.R)
        self.t = float(self.t)

        if np.any(self.n_E < 0) or np.any(self.n_I < 0) or self.S < 0 or self.R < 0:
            raise EpimonValidationException('密度与 S, R 必须非负')

    @classmethod
    def zeros(cls, params: ModelParams, S=0.0, R=0.0, t=0.0):
        return cls(params.h, np.zeros(params.m_E), np.zeros(params.m_I), S, R, t)

    @classmethod
    def from_vector(cls, params: ModelParams, vector, S=0.0, R=0.0, t=0.0):
        vector = np.asarray(vector, dtype=float)

        if vector.size != params.size:
            raise EpimonValidationException(f'向量长度 {vector.size} 与网格 {params.size} 不一致')

        return cls(params.h, vector[:params.m_E], vector[params.m_E:], S, R, t)

    @classmethod
    def from_profiles(cls, params: ModelParams, n_E=0.0, n_I=0.0, S=0.0, R=0.0, t=0.0):
        """由剖面描述(常数, 三角脉冲, 表格)构造"""

        return cls(
            params.h,
            sample(n_E, params.m_E, params.h, 'n_E'),
            sample(n_I, params.m_I, params.h, 'n_I'),
            S,
            R,
            t,
        )

    @property
    def E(self):
        return self.h * float(np.sum(self.n_E))

    @property
    def I(self):  # noqa: E743
        return self.h * float(np.sum(self.n_I))

    @property
    def N(self):
        return self.S + self.E + self.I + self.R

    def vector(self):
        return np.concatenate([self.n_E, self.n_I])

    def copy(self):
        return DensityState(self.h, self.n_E.copy(), self.n_I.copy(), self.S, self.R, self.t)


@dataclass
class ObservableKernel:
    """观测泛函 φ(n) = ∫ n_I dκ, κ 由 n_I 网格上的权重与若干点质量组成"""

    weights: np.ndarray
    point_masses: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        self.point_masses = [(float(x), float(mass)) for x, mass in self.point_masses]

        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise EpimonValidationException('观测权重必须非负')

        if any(mass <= 0 or x < 0 for x, mass in self.point_masses):
            raise EpimonValidationException('点质量必须为正且年龄非负')

        if not np.any(self.weights > 0) and not self.point_masses:
            raise EpimonValidationException('观测核不能为零')

    @classmethod
    def unit(cls, params: ModelParams):
        """单位权重, 观测值即 I(t)"""

        return cls(np.ones(params.m_I))

    @classmethod
    def pure_delay(cls, params: ModelParams, pi, tau):
        """
        纯延迟观测 Y(t) = π C(t - τ)

        :param pi: 比例系数 π
        :param tau: 从接触到观测的延迟 τ, 需满足 x_E* ≤ τ ≤ x_E* + x_I*
        """

        x = tau - params.x_E_star

        if x < 0 or x > params.x_I_star:
            raise EpimonValidationException(f'延迟 τ={tau} 超出 [x_E*, x_E*+x_I*]')

        return cls(np.zeros(params.m_I), [(x, pi)])

    @classmethod
    def from_config(cls, spec, params: ModelParams):
        spec = spec or {}

        if 'pure_delay' in spec:
            return cls.pure_delay(params, float(spec['pure_delay']['pi']), float(spec['pure_delay']['tau']))

        weights = sample(spec.get('weights', 1.0), params.m_I, params.h, 'weights')
        return cls(weights, [tuple(p) for p in spec.get('point_masses', [])])


@dataclass
class Scenario:
    """一次模拟所需的全部输入"""

    name: str
    params: ModelParams
    init: DensityState
    kernel: ObservableKernel
    horizon: float
    dt: float
    nonlinear: bool = False
    epoch: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)


def _schedule(items, epoch):
    schedule = []

    for item in items:
        if isinstance(item, dict):
            start, mu = item['start'], item['mu']
        else:
            start, mu = item

        if isinstance(start, str):
            start = to_day(start, epoch)

        schedule.append((float(start), float(mu)))

    return schedule


def load_scenario(source) -> Scenario:
    """
    读取场景配置(json 文件路径或 dict)

    :param source: 路径或 dict
    :return: Scenario
    """

    raw = read_json(source) if isinstance(source, (str, Path)) else copy.deepcopy(source)

    try:
        epoch = as_date(raw.get('epoch') or config.get('EPOCH')).isoformat()
        grid = raw.get('grid', {})
        h = float(grid.get('h', config.get('GRID.H')))
        dt = float(grid.get('dt', h))

        p = raw['params']
        params = ModelParams(
            float(p.get('x_E_star', 0.0)),
            float(p['x_I_star']),
            h,
            p.get('K_EI', 0.0),
            p.get('K_IR', 0.0),
            p.get('psi', 1.0),
            _schedule(p.get('mu_schedule', [[0, p.get('mu', 0.0)]]), epoch),
        )

        init = raw.get('init', {})
        state = DensityState.from_profiles(
            params,
            init.get('n_E', 0.0),
            init.get('n_I', 1.0),
            init.get('S', 0.0),
            init.get('R', 0.0),
        )

        kernel = ObservableKernel.from_config(raw.get('kernel'), params)
        horizon = float(raw.get('horizon', 0.0))
    except (KeyError, TypeError, ValueError) as ex:
        raise EpimonValidationException(f'场景配置无效: {ex!r}')

    for key in set(raw) - {'name', 'epoch', 'grid', 'params', 'init', 'kernel', 'horizon', 'nonlinear'}:
        logger.debug(f'忽略未知的场景配置项 {key}')

    return Scenario(
        raw.get('name', 'scenario'),
        params,
        state,
        kernel,
        horizon,
        dt,
        bool(raw.get('nonlinear', False)),
        epoch,
        raw,
    )
