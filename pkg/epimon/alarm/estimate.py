"""
对数计数窗口上的斜率推断

- gauss-ols: 最小二乘, 高斯噪声, Student t 枢轴量
- laplace-l1: 最小一乘, Laplace 噪声, 渐近正态
- combined: 多个序列按逆方差加权
"""
import math
from dataclasses import asdict
from dataclasses import dataclass
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.special import betainc
from scipy.special import betaincinv
from scipy.stats import norm

from epimon.compat import SlopeModel
from epimon.exceptions import EpimonValidationException
from epimon.exceptions import InsufficientDataError
from epimon.segfit import fit_line_l1


@dataclass(frozen=True)
class SlopeEstimate:
    model: SlopeModel
    beta_hat: float
    alpha_hat: float
    scale: float
    V: float
    n: int
    df: int
    x_bar: float
    sxx: float
    x_last: Optional[float] = None

    def to_dict(self):
        return asdict(self)


class Intervals(NamedTuple):
    alpha: Tuple[float, float]
    beta: Tuple[float, float]
    z: Optional[Tuple[float, float]]
    quantile: float


class GaussianIntervals(NamedTuple):
    symmetric: Tuple[float, float]
    lower: Tuple[float, float]
    upper: Tuple[float, float]
    quantile: float


def _xz(X, Z):
    x = np.asarray(X, dtype=float).ravel()
    z = np.asarray(Z, dtype=float).ravel()

    if x.size != z.size:
        raise EpimonValidationException(f'X 与 Z 长度不一致: {x.size} != {z.size}')

    if x.size < 3:
        raise InsufficientDataError(f'斜率估计至少需要 3 个点, 实际 {x.size}')

    if np.ptp(x) == 0:
        raise EpimonValidationException('所有 X 相同, 斜率不可辨识')

    return x, z


def ols_fit(X, Z) -> SlopeEstimate:
    """
    最小二乘估计 β̂, α̂ 与 σ̂² = Σ残差² / (n - 2), V = σ̂² / Sxx

    :param X: 日序号
    :param Z: 对数计数
    :return: SlopeEstimate(model='gauss-ols')
    """

    x, z = _xz(X, Z)
    n = x.size

    x_bar, z_bar = float(x.mean()), float(z.mean())
    sxx = float(np.sum((x - x_bar) ** 2))

    beta = float(np.sum((x - x_bar) * (z - z_bar)) / sxx)
    alpha = z_bar - beta * x_bar

    residual = z - alpha - beta * x
    sigma2 = float(np.sum(residual ** 2)) / (n - 2)

    return SlopeEstimate('gauss-ols', beta, alpha, math.sqrt(sigma2), sigma2 / sxx, n, n - 2, x_bar, sxx, float(x[-1]))


def l1_fit(X, Z) -> SlopeEstimate:
    """
    最小一乘估计(Laplace 噪声的极大似然)

    λ̂ 为平均绝对残差, V = λ̂² / (ΣX² - (ΣX)²/n)

    :return: SlopeEstimate(model='laplace-l1')
    """

    x, z = _xz(X, Z)
    n = x.size

    beta, alpha, loss = fit_line_l1(zip(x, z))
    scale = loss / n

    x_bar = float(x.mean())
    sxx = float(np.sum((x - x_bar) ** 2))

    return SlopeEstimate('laplace-l1', beta, alpha, scale, scale * scale / sxx, n, n - 2, x_bar, sxx, float(x[-1]))


def student_cdf(t, df):
    """Student t 分布函数, 由正则化不完全 beta 函数计算"""

    if df <= 0:
        raise EpimonValidationException(f'自由度必须为正: {df}')

    t = np.asarray(t, dtype=float)

    with np.errstate(divide='ignore', invalid='ignore'):
        tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))

    value = np.where(t > 0, 1.0 - tail, tail)
    return float(value) if value.ndim == 0 else value


def student_quantile(gamma, df) -> float:
    """
    Student t 分布的 γ 分位数, 由不完全 beta 函数求逆

    :param gamma: 0 < γ < 1
    :param df: 自由度
    :return: float
    """

    if not 0 < gamma < 1:
        raise EpimonValidationException(f'γ 必须在 (0, 1) 内: {gamma}')

    if df <= 0:
        raise EpimonValidationException(f'自由度必须为正: {df}')

    if gamma == 0.5:
        return 0.0

    x = float(betaincinv(df / 2.0, 0.5, 2.0 * min(gamma, 1.0 - gamma)))
    t = math.sqrt(df * (1.0 - x) / x)

    return t if gamma > 0.5 else -t


def pivot_cdf(est: SlopeEstimate, value):
    """枢轴量 (β - β̂)/√V 的分布函数: gauss-ols 为 t(n-2), 其余为标准正态"""

    if est.model == 'gauss-ols':
        return student_cdf(value, est.df)

    return float(norm.cdf(value))


def pivot_quantile(est: SlopeEstimate, gamma) -> float:
    if est.model == 'gauss-ols':
        return student_quantile(gamma, est.df)

    if not 0 < gamma < 1:
        raise EpimonValidationException(f'γ 必须在 (0, 1) 内: {gamma}')

    return float(norm.ppf(gamma))


def _epsilon(epsilon):
    if not 0 < epsilon < 1:
        raise EpimonValidationException(f'ε 必须在 (0, 1) 内: {epsilon}')

    return epsilon


def confidence_intervals(est: SlopeEstimate, epsilon=0.05, forecast_day=None) -> Intervals:
    """
    置信度 1 - ε 的 α, β 区间以及 forecast_day 处 Z 的预测区间

    :param est: gauss-ols 估计
    :param epsilon: ε
    :param forecast_day: 预测日, 可选
    :return: Intervals
    """

    if est.model != 'gauss-ols':
        raise EpimonValidationException(f'{est.model} 估计请使用 gaussian_intervals')

    q = student_quantile(1.0 - _epsilon(epsilon) / 2.0, est.df)
    s = est.scale

    half_alpha = q * s * math.sqrt(1.0 / est.n + est.x_bar ** 2 / est.sxx)
    half_beta = q * math.sqrt(est.V)

    z = None

    if forecast_day is not None:
        centre = est.alpha_hat + est.beta_hat * forecast_day
        half_z = q * s * math.sqrt(1.0 + 1.0 / est.n + (forecast_day - est.x_bar) ** 2 / est.sxx)
        z = (centre - half_z, centre + half_z)

    return Intervals(
        (est.alpha_hat - half_alpha, est.alpha_hat + half_alpha),
        (est.beta_hat - half_beta, est.beta_hat + half_beta),
        z,
        q,
    )


def gaussian_intervals(est: SlopeEstimate, epsilon=0.05) -> GaussianIntervals:
    """高斯近似下 β 的对称区间与两个单侧区间"""

    _epsilon(epsilon)

    sd = math.sqrt(max(est.V, 0.0))
    two = float(norm.ppf(1.0 - epsilon / 2.0))
    one = float(norm.ppf(1.0 - epsilon))

    return GaussianIntervals(
        (est.beta_hat - two * sd, est.beta_hat + two * sd),
        (est.beta_hat - one * sd, math.inf),
        (-math.inf, est.beta_hat + one * sd),
        two,
    )


def trapezoid_domain(est: SlopeEstimate, z_last=None, t_last=None, horizon=6, epsilon=0.05) -> pd.DataFrame:
    """
    梯形预测域: (β̂(t - t_n) + Ẑ_n) ± (√V (t - t_n) + √(σ̂² + Var Ẑ_n)) q

    gauss-ols 取 t(n-2) 分位数; laplace-l1 取正态分位数, 新观测的噪声标准差为 √2 λ̂.

    :param est: 斜率估计
    :param z_last: Ẑ_n, 默认 α̂ + β̂ t_n
    :param t_last: t_n, 默认窗口最后一天
    :param horizon: 向前天数
    :param epsilon: ε
    :return: pd.DataFrame, 列 day, center, lower, upper
    """

    if horizon < 0:
        raise EpimonValidationException(f'horizon 必须非负: {horizon}')

    if est.model == 'combined':
        raise EpimonValidationException('合并估计没有残差尺度, 无法构造梯形域')

    t_last = est.x_last if t_last is None else t_last

    if t_last is None:
        raise EpimonValidationException('需要给出 t_last')

    z_last = est.alpha_hat + est.beta_hat * t_last if z_last is None else z_last
    q = pivot_quantile(est, 1.0 - _epsilon(epsilon) / 2.0)

    noise2 = est.scale ** 2 if est.model == 'gauss-ols' else 2.0 * est.scale ** 2
    var_z = est.scale ** 2 * (1.0 / est.n + (t_last - est.x_bar) ** 2 / est.sxx)

    ahead = np.arange(int(horizon) + 1, dtype=float)
    center = z_last + est.beta_hat * ahead
    half = (math.sqrt(est.V) * ahead + math.sqrt(noise2 + var_z)) * q

    return pd.DataFrame({'day': t_last + ahead, 'center': center, 'lower': center - half, 'upper': center + half})


def prediction_band(est: SlopeEstimate, days, epsilon=0.05) -> pd.DataFrame:
    """
    拟合窗口内逐日的新观测预测区间 (α̂ + β̂ d) ± q √(σ² + σ̂² (1/n + (d - x̄)²/Sxx))

    gauss-ols 时与 confidence_intervals(est, ε, forecast_day=d).z 一致; laplace-l1 取正态分位数且 σ² = 2λ̂².

    :param est: 斜率估计
    :param days: 日序号
    :param epsilon: ε
    :return: pd.DataFrame, 列 day, center, lower, upper
    """

    if est.model == 'combined':
        raise EpimonValidationException('合并估计没有残差尺度, 无法构造预测区间')

    days = np.asarray(days, dtype=float)
    q = pivot_quantile(est, 1.0 - _epsilon(epsilon) / 2.0)

    noise2 = est.scale ** 2 if est.model == 'gauss-ols' else 2.0 * est.scale ** 2
    var_fit = est.scale ** 2 * (1.0 / est.n + (days - est.x_bar) ** 2 / est.sxx)

    center = est.alpha_hat + est.beta_hat * days
    half = q * np.sqrt(noise2 + var_fit)

    return pd.DataFrame({'day': days, 'center': center, 'lower': center - half, 'upper': center + half})


def slope_positive_probability(est: SlopeEstimate) -> float:
    """
    p⁺ = P(β > 0) = F(β̂/√V); V = 0 时按 β̂ 的符号取 1, ½, 0

    :param est: 斜率估计
    :return: float
    """

    if not est.V > 0:
        return 1.0 if est.beta_hat > 0 else (0.5 if est.beta_hat == 0 else 0.0)

    return float(pivot_cdf(est, est.beta_hat / math.sqrt(est.V)))


def combine(estimates: Sequence[SlopeEstimate]) -> SlopeEstimate:
    """
    逆方差加权合并 β̂ = Σ(β̂_j/V_j) / Σ(1/V_j), V = 1/Σ(1/V_j)

    恰有一个 V_j = 0 时直接返回该估计, 其余情形 (包括单个估计) 一律标记为 'combined'.

    :param estimates: 斜率估计列表
    :return: SlopeEstimate(model='combined')
    """

    if not estimates:
        raise EpimonValidationException('combine 需要至少一个估计')

    exact = [e for e in estimates if not e.V > 0]

    if len(exact) == 1:
        return exact[0]

    if exact:
        raise EpimonValidationException('多个估计的方差为 0, 无法合并')

    weights = np.asarray([1.0 / e.V for e in estimates])
    betas = np.asarray([e.beta_hat for e in estimates])
    total = float(weights.sum())

    return SlopeEstimate(
        'combined',
        float(np.dot(weights, betas) / total),
        math.nan,
        math.nan,
        1.0 / total,
        sum(e.n for e in estimates),
        sum(e.df for e in estimates),
        math.nan,
        float(sum(e.sxx for e in estimates)),
    )
