"""
Perron 特征问题: 特征方程 μ G^λ = 1, 特征向量, Hilbert 射影距离与分段线性近似误差界
"""
import math
from dataclasses import dataclass
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import bisect

from epimon import config
from epimon.engine import step_matrix
from epimon.exceptions import EpimonNumericalError
from epimon.exceptions import EpimonValidationException
from epimon.logger import logger
from epimon.model import DensityState
from epimon.model import ModelParams


@dataclass
class EigenSolution:
    """特征值 λ 与单元中心处的特征向量 (n̄_E, n̄_I), 归一化 n̄_E(0) = 1"""

    lam: float
    n_E: np.ndarray
    n_I: np.ndarray
    n_E0: float = 1.0
    n_I0: float = 1.0
    mu: Optional[float] = None
    discrete: bool = False

    def vector(self):
        return np.concatenate([self.n_E, self.n_I])

    @property
    def doubling_time(self):
        return doubling_time(self.lam)


@dataclass(frozen=True)
class TropicalBound:
    delta: float
    per_hop: Tuple[float, ...]


def _phi(a):
    """(1 - e^{-a}) / a, a → 0 时取 1"""

    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-12
    safe = np.where(small, 1.0, a)

    with np.errstate(over='ignore', invalid='ignore'):
        return np.where(small, 1.0 - a / 2.0, -np.expm1(-safe) / safe)


def _edges(rate, h):
    """F^λ 在各单元左端点的取值以及区间末端的取值"""

    cumulative = np.cumsum(rate * h)
    left = np.concatenate([[0.0], cumulative[:-1]]) if rate.size else rate
    return left, float(cumulative[-1]) if rate.size else 0.0


def _factors(params: ModelParams, lam):
    """特征函数的两个因子, 在每个单元上对分段常数系数精确积分"""

    h = params.h

    with np.errstate(over='ignore', invalid='ignore'):
        r_I = lam + params.K_IR
        left_I, _ = _edges(r_I, h)
        first = h * float(np.sum(params.psi * np.exp(-left_I) * _phi(r_I * h)))

        r_E = lam + params.K_EI
        left_E, end_E = _edges(r_E, h)
        second = h * float(np.sum(params.K_EI * np.exp(-left_E) * _phi(r_E * h))) + float(np.exp(-end_E)) if params.m_E else 1.0

    return first, second


def characteristic_value(params: ModelParams, lam) -> float:
    """
    特征函数 G^λ = (∫ψ e^{-F_{I→R}}) (∫K_{E→I} e^{-F_{E→I}} + e^{-F_{E→I}(x_E*)})

    :param params: 模型参数
    :param lam: λ (1/天)
    :return: float, 严格正且关于 λ 严格递减
    """

    first, second = _factors(params, float(lam))

    with np.errstate(over='ignore', invalid='ignore'):
        return first * second


def _log_residual(params, mu, lam):
    value = characteristic_value(params, lam)

    if value == 0:
        return -math.inf

    if math.isinf(value) or math.isnan(value):
        return math.inf

    return math.log(mu) + math.log(value)


def perron_eigenvalue(params: ModelParams, mu, tol=None) -> float:
    """
    求解 μ G^λ = 1: 先几何扩展区间, 再二分

    :param params: 模型参数
    :param mu: μ > 0
    :param tol: |μ G^λ - 1| 容差, 默认取配置 SPECTRAL.TOL
    :return: λ
    """

    if not mu > 0 or not math.isfinite(mu):
        raise EpimonValidationException(f'μ 必须为正: {mu}')

    tol = tol or config.get('SPECTRAL.TOL')
    lo, hi = config.get('SPECTRAL.BRACKET')
    max_expand = config.get('SPECTRAL.MAX_EXPAND')

    def f(lam):
        return _log_residual(params, mu, lam)

    if abs(f(0.0)) <= 8 * np.finfo(float).eps:
        logger.debug(f'μ={mu:.6g} 为临界值, λ=0')
        return 0.0

    for _ in range(max_expand):
        if f(lo) > 0:
            break
        lo *= 2
        logger.debug(f'扩展区间下界至 {lo}')

    for _ in range(max_expand):
        if f(hi) < 0:
            break
        hi *= 2
        logger.debug(f'扩展区间上界至 {hi}')

    f_lo, f_hi = f(lo), f(hi)

    if f_lo == 0:
        return float(lo)

    if f_hi == 0:
        return float(hi)

    if not (f_lo > 0 > f_hi):
        raise EpimonNumericalError(f'区间扩展失败: [{lo}, {hi}]', data={'mu': mu})

    lam = bisect(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=400)
    residual = abs(mu * characteristic_value(params, lam) - 1.0)

    if residual > tol:
        raise EpimonNumericalError(f'特征方程残差 {residual:.3g} 超过容差 {tol}', data={'mu': mu, 'lambda': lam})

    logger.debug(f'μ={mu:.6g} -> λ={lam:.10g}, 残差 {residual:.2g}')
    return float(lam)


def eigenvector(params: ModelParams, lam, mu=None) -> EigenSolution:
    """
    由指数公式重建单元中心处的特征向量

    n̄_E(x) = e^{-F_{E→I}(x)}, n̄_I(0) = ∫K_{E→I} n̄_E + n̄_E(x_E*), n̄_I(x) = n̄_I(0) e^{-F_{I→R}(x)}
    """

    lam = float(lam)
    h = params.h

    r_E = lam + params.K_EI
    left_E, _ = _edges(r_E, h)
    _, n_I0 = _factors(params, lam)

    r_I = lam + params.K_IR
    left_I, _ = _edges(r_I, h)

    with np.errstate(over='ignore'):
        n_E = np.exp(-(left_E + r_E * h / 2))
        n_I = n_I0 * np.exp(-(left_I + r_I * h / 2))

    if not (np.all(np.isfinite(n_E)) and np.all(np.isfinite(n_I)) and np.all(n_E > 0) and np.all(n_I > 0)):
        raise EpimonNumericalError(f'λ={lam} 的特征向量溢出')

    return EigenSolution(lam, n_E, n_I, 1.0, n_I0, mu)


def eigen_residual(params: ModelParams, solution: EigenSolution, mu) -> float:
    """
    把 (λ, n̄) 代入离散边界条件后的相对残差(中点求积)

    :return: max(|μ∫ψn̄_I - n̄_E(0)|, |∫K n̄_E + n̄_E(x_E*) - n̄_I(0)|), 以 n̄_E(0), n̄_I(0) 归一
    """

    h = params.h
    inflow_E = mu * h * float(np.dot(params.psi, solution.n_I))
    residual = abs(inflow_E - solution.n_E0) / solution.n_E0

    if params.m_E:
        atom = solution.n_E[-1] * math.exp(-(solution.lam + params.K_EI[-1]) * h / 2)
        inflow_I = h * float(np.dot(params.K_EI, solution.n_E)) + atom
    else:
        inflow_I = solution.n_E0

    return max(residual, abs(inflow_I - solution.n_I0) / solution.n_I0)


def discrete_eigen(params: ModelParams, mu, dt=None) -> EigenSolution:
    """
    一步矩阵的 Perron 根与向量, λ = ln ρ / dt

    :param params: 模型参数
    :param mu: μ > 0
    :param dt: 时间步长
    :return: EigenSolution(discrete=True)
    """

    dt = float(dt or config.get('GRID.DT'))
    values, vectors = scipy.linalg.eig(step_matrix(params, dt, mu))

    k = int(np.argmax(values.real))
    rho = values[k].real

    if not rho > 0 or abs(values[k].imag) > 1e-9 * abs(rho):
        raise EpimonNumericalError(f'主特征值异常: {values[k]}')

    v = np.real(vectors[:, k])
    v = v / v[np.argmax(np.abs(v))]

    if np.any(v < -1e-9):
        raise EpimonNumericalError('主特征向量存在负分量')

    v = np.clip(v, np.finfo(float).tiny, None)
    v = v / v[0]

    n_E, n_I = v[:params.m_E], v[params.m_E:]
    n_E0 = float(n_E[0]) if params.m_E else 1.0

    return EigenSolution(math.log(rho) / dt, n_E, n_I, n_E0, float(n_I[0]), mu, True)


def _as_vector(value):
    if isinstance(value, EigenSolution):
        return value.vector()

    if isinstance(value, DensityState):
        return value.vector()

    return np.asarray(value, dtype=float).ravel()


def hilbert_distance(v, w) -> float:
    """
    正卦限上的 Hilbert 射影距离 max log(v/w) - min log(v/w)

    :param v: 正向量
    :param w: 正向量
    :return: float
    """

    v, w = _as_vector(v), _as_vector(w)

    if v.shape != w.shape:
        raise EpimonValidationException(f'向量长度不一致: {v.size} != {w.size}')

    if not v.size:
        raise EpimonValidationException('向量为空')

    if not (np.all(v > 0) and np.all(w > 0) and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise EpimonValidationException('Hilbert 距离要求分量严格为正')

    ratio = np.log(v) - np.log(w)
    return float(ratio.max() - ratio.min())


def tropical_bound_delta(v0, eigvecs: Sequence) -> TropicalBound:
    """
    Δ = d_H(v0, u¹) + d_H(u¹, u²) + ...

    :param v0: 初始状态(向量, DensityState 或 EigenSolution)
    :param eigvecs: 各阶段的特征向量, 按时间顺序
    :return: TropicalBound
    """

    if not eigvecs:
        raise EpimonValidationException('至少需要一个阶段的特征向量')

    chain = [_as_vector(v0)] + [_as_vector(u) for u in eigvecs]
    hops = tuple(hilbert_distance(a, b) for a, b in zip(chain, chain[1:]))

    return TropicalBound(float(sum(hops)), hops)


def doubling_time(lam) -> float:
    """倍增时间 ln2/λ, λ = 0 时为 +∞, 负值表示减半时间"""

    lam = float(lam)
    return math.inf if lam == 0 else math.log(2) / lam


def eigvec_distance_bound(lam1, lam2, params: ModelParams) -> float:
    """两个阶段特征向量 Hilbert 距离的上界 |λ¹ - λ²| (x_E* + x_I*)"""

    return abs(lam1 - lam2) * params.span


def mu_ratio_bound(lam_i, lam_j, params: ModelParams) -> float:
    """μ 比值的上界 exp((λʲ - λⁱ)⁺ (x_E* + x_I*))"""

    return math.exp(max(lam_j - lam_i, 0.0) * params.span)
