"""
对数观测量的分段线性拟合

两种形式:

- dp-segments: 动态规划得到的全局最优分段, 各段独立拟合, 断点处可以不连续
- min-of-lines: L(t) = min_j(λ_j t + c_j), 连续且凹, 由凹包络初始化后用 Nelder-Mead 局部优化
"""
import math
from dataclasses import dataclass
from typing import List
from typing import Sequence
from typing import Tuple

import numpy as np
from scipy.optimize import minimize

from epimon import config
from epimon.consts import LOSS_TIE_TOL
from epimon.consts import TROPICAL_TOL
from epimon.exceptions import EpimonValidationException
from epimon.exceptions import InsufficientDataError
from epimon.logger import logger
from epimon.series import LogSeries
from epimon.spectral import doubling_time

LOSS_KINDS = ('l1', 'l2')


@dataclass(frozen=True)
class SegmentedFit:
    """
    分段拟合结果

    dp-segments 的 segments 按时间顺序排列, breakpoints 为后一段的第一天;
    min-of-lines 的 segments 按斜率升序排列, breakpoints 为包络上相邻直线的交点.
    """

    kind: str
    loss_kind: str
    breakpoints: Tuple[float, ...]
    segments: Tuple[Tuple[float, float], ...]
    loss: float
    span: Tuple[float, float] = (0.0, 0.0)

    @property
    def slopes(self):
        return [s for s, _ in self.segments]

    def evaluate(self, days) -> np.ndarray:
        """在给定日期上求拟合函数的值"""

        t = np.asarray(days, dtype=float)
        lines = np.asarray(self.segments, dtype=float)

        if self.kind == 'min-of-lines':
            return np.min(lines[:, :1] * t[None, :] + lines[:, 1:], axis=0) if t.ndim else float(np.min(lines[:, 0] * t + lines[:, 1]))

        index = np.searchsorted(np.asarray(self.breakpoints, dtype=float), t, side='right')
        return lines[index, 0] * t + lines[index, 1]

    def pieces(self) -> List[dict]:
        """按时间顺序的 (start, end, slope, intercept, doubling_time) 列表"""

        if self.kind == 'min-of-lines':
            ordered = _active(list(self.segments), self.span)
        else:
            ordered = list(self.segments)

        edges = [self.span[0], *self.breakpoints, self.span[1]]

        return [
            {
                'start': start,
                'end': end,
                'slope': slope,
                'intercept': intercept,
                'doubling_time': doubling_time(slope),
            }
            for (slope, intercept), start, end in zip(ordered, edges, edges[1:])
        ]


def _xz(series):
    if isinstance(series, LogSeries):
        return series.x, series.values

    points = np.asarray(list(series), dtype=float).reshape(-1, 2)
    return points[:, 0], points[:, 1]


def _loss(residuals, loss_kind):
    residuals = np.asarray(residuals, dtype=float)

    if loss_kind == 'l1':
        return float(np.sum(np.abs(residuals)))

    return float(np.sum(residuals * residuals))


def _check_loss(loss_kind):
    if loss_kind not in LOSS_KINDS:
        raise EpimonValidationException(f'未知的损失函数 {loss_kind!r}, 可选 {LOSS_KINDS}')


def _ties(losses, best):
    return losses <= best + LOSS_TIE_TOL * max(1.0, abs(best))


def fit_line_l1(points) -> Tuple[float, float, float]:
    """
    精确的 ℓ1 直线拟合 min Σ|α + βx - z|

    总有一条最优直线经过两个数据点. 以每个点为锚点, 经过它的最优直线斜率是其余点斜率的加权中位数
    (权重 |Δx|), 对这些候选直线求损失后取最小者; 损失相同时取 |β| 较小, 其次 |α| 较小的直线.

    :param points: (x, z) 序列或 LogSeries
    :return: (slope, intercept, loss)
    """

    x, z = _xz(points)
    n = x.size

    if n < 2:
        raise InsufficientDataError(f'ℓ1 直线拟合至少需要 2 个点, 实际 {n}')

    if np.ptp(x) == 0:
        raise EpimonValidationException('所有 x 相同, 直线不可辨识')

    dx = x[None, :] - x[:, None]
    dz = z[None, :] - z[:, None]
    weight = np.abs(dx)

    with np.errstate(divide='ignore', invalid='ignore'):
        slope = np.where(weight > 0, dz / np.where(weight > 0, dx, 1.0), np.inf)

    order = np.argsort(slope, axis=1, kind='stable')
    slope = np.take_along_axis(slope, order, axis=1)
    weight = np.take_along_axis(weight, order, axis=1)

    cumulative = np.cumsum(weight, axis=1)
    half = cumulative[:, -1:] / 2.0
    tol = 1e-12 * cumulative[:, -1:]

    rows = np.arange(n)
    median = np.argmax(cumulative >= half - tol, axis=1)

    # 加权中位数不唯一时, 区间两端都是候选
    flat = np.abs(cumulative[rows, median] - half[:, 0]) <= tol[:, 0]
    upper = np.minimum(median + 1, n - 1)

    anchors = np.concatenate([rows, rows[flat]])
    betas = np.concatenate([slope[rows, median], slope[rows[flat], upper[flat]]])

    keep = np.isfinite(betas)
    anchors, betas = anchors[keep], betas[keep]
    alphas = z[anchors] - betas * x[anchors]

    losses = np.abs(alphas[:, None] + betas[:, None] * x[None, :] - z[None, :]).sum(axis=1)
    best = losses.min()
    tied = np.flatnonzero(_ties(losses, best))
    pick = tied[np.lexsort((np.abs(alphas[tied]), np.abs(betas[tied])))[0]]

    return float(betas[pick]), float(alphas[pick]), float(losses[pick])


def fit_line_l2(points) -> Tuple[float, float, float]:
    """最小二乘直线, 返回 (slope, intercept, 残差平方和)"""

    x, z = _xz(points)

    if x.size < 2:
        raise InsufficientDataError(f'直线拟合至少需要 2 个点, 实际 {x.size}')

    x_bar, z_bar = x.mean(), z.mean()
    sxx = float(np.sum((x - x_bar) ** 2))

    if sxx == 0:
        raise EpimonValidationException('所有 x 相同, 直线不可辨识')

    beta = float(np.sum((x - x_bar) * (z - z_bar)) / sxx)
    alpha = float(z_bar - beta * x_bar)

    return beta, alpha, _loss(alpha + beta * x - z, 'l2')


def fit_line(points, loss_kind='l1'):
    _check_loss(loss_kind)
    return fit_line_l1(points) if loss_kind == 'l1' else fit_line_l2(points)


def fit_segmented_dp(series, nu, loss_kind='l1') -> SegmentedFit:
    """
    Bellman 动态规划: 把按日排序的点划分为至多 ν 个连续段(每段至少 2 点), 使总损失最小

    后缀递推 F[k][i] = min_j cost(i..j) + F[k-1][j+1]. 损失相同时取较早的断点, 其次取较少的段数.

    :param series: LogSeries 或 (x, z) 序列
    :param nu: 段数上限 ν ≥ 1
    :param loss_kind: 'l1' 或 'l2'
    :return: SegmentedFit(kind='dp-segments')
    """

    _check_loss(loss_kind)

    if int(nu) != nu or nu < 1:
        raise EpimonValidationException(f'ν 必须为正整数: {nu}')

    nu = int(nu)
    x, z = _xz(series)
    n = x.size

    if n < 2 * nu:
        raise InsufficientDataError(f'{nu} 段拟合至少需要 {2 * nu} 个点, 实际 {n}')

    cost = np.full((n, n), np.inf)
    lines = {}

    for i in range(n - 1):
        for j in range(i + 1, n):
            beta, alpha, loss = fit_line(zip(x[i:j + 1], z[i:j + 1]), loss_kind)
            cost[i, j] = loss
            lines[i, j] = (beta, alpha)

    F = np.full((nu + 1, n + 1), np.inf)
    choice = np.full((nu + 1, n + 1), -1, dtype=int)
    F[0, n] = 0.0

    for k in range(1, nu + 1):
        for i in range(n - 2, -1, -1):
            best, arg = np.inf, -1

            for j in range(i + 1, n):
                rest = F[k - 1, j + 1]

                if not math.isfinite(rest):
                    continue

                value = cost[i, j] + rest

                if value < best - LOSS_TIE_TOL * max(1.0, abs(best) if math.isfinite(best) else 0.0):
                    best, arg = value, j

            F[k, i], choice[k, i] = best, arg

    totals = F[1:, 0]
    target = totals.min()
    k = int(np.flatnonzero(_ties(totals, target))[0]) + 1

    segments, starts = [], []
    i = 0

    for level in range(k, 0, -1):
        j = choice[level, i]
        segments.append(lines[i, j])
        starts.append(i)
        i = j + 1

    logger.debug(f'动态规划: {k} 段, 损失 {target:.6g}')

    return SegmentedFit(
        'dp-segments',
        loss_kind,
        tuple(float(x[s]) for s in starts[1:]),
        tuple(segments),
        float(sum(cost[s, e - 1] for s, e in zip(starts, starts[1:] + [n]))),
        (float(x[0]), float(x[-1])),
    )


def _crossings(lines):
    ts = []

    for a in range(len(lines)):
        for b in range(a + 1, len(lines)):
            (s1, c1), (s2, c2) = lines[a], lines[b]

            if s1 != s2:
                ts.append((c2 - c1) / (s1 - s2))

    return ts


def _sample_days(lines, span=None):
    """在相邻关键点的中点上取值的探测点"""

    ts = _crossings(lines)

    if span is not None:
        lo, hi = span

        if lo == hi:
            return [lo]

        points = sorted({lo, hi, *[t for t in ts if lo < t < hi]})
    else:
        points = sorted(set(ts))
        points = [points[0] - 1.0, *points, points[-1] + 1.0] if points else [0.0, 1.0]

    return [(a + b) / 2 for a, b in zip(points, points[1:])]


def _dedupe(lines):
    """同斜率的直线只保留截距最小的一条"""

    lowest = {}

    for slope, intercept in lines:
        slope, intercept = float(slope), float(intercept)
        lowest[slope] = min(intercept, lowest.get(slope, math.inf))

    return sorted(lowest.items())


def _active(lines, span):
    """包络上起作用的直线, 按时间顺序(斜率降序)"""

    lines = _dedupe(lines)
    arr = np.asarray(lines)
    samples = np.asarray(_sample_days(lines, span if span[0] < span[1] else None))
    winners = np.argmin(arr[:, :1] * samples[None, :] + arr[:, 1:], axis=0)

    ordered = []

    for w in winners:
        if not ordered or ordered[-1] != w:
            ordered.append(int(w))

    return [lines[i] for i in ordered]


def envelope_breakpoints(lines, span=None) -> List[float]:
    """包络上相邻有效直线的交点, 按时间顺序"""

    active = _active(lines, span or (0.0, 0.0))
    return [(c2 - c1) / (s1 - s2) for (s1, c1), (s2, c2) in zip(active, active[1:])]


def concave_envelope_init(lines, span=None) -> List[Tuple[float, float]]:
    """
    逐段拟合直线的凹包络: 保留在 span 上(不给出时在整条实轴上)某处取到最小值的直线

    :param lines: (slope, intercept) 列表
    :param span: 可选的 (开始日, 结束日)
    :return: 按斜率升序的 (slope, intercept) 列表
    """

    if not lines:
        raise EpimonValidationException('至少需要一条直线')

    unique = _dedupe(lines)

    if len(unique) == 1:
        return unique

    arr = np.asarray(unique)
    samples = np.asarray(_sample_days(unique, span))
    winners = set(np.argmin(arr[:, :1] * samples[None, :] + arr[:, 1:], axis=0).tolist())

    return [unique[i] for i in sorted(winners)]


def _minlines_fit(lines, x, z, loss_kind):
    lines = sorted((float(s), float(c)) for s, c in lines)
    arr = np.asarray(lines)
    loss = _loss(np.min(arr[:, :1] * x[None, :] + arr[:, 1:], axis=0) - z, loss_kind)
    span = (float(x[0]), float(x[-1]))
    breakpoints = envelope_breakpoints(lines, span)

    return SegmentedFit('min-of-lines', loss_kind, tuple(breakpoints), tuple(lines), loss, span)


def fit_minlines_local(series, nu, init, loss_kind='l1') -> SegmentedFit:
    """
    从 init 出发用 Nelder-Mead 局部优化 L(t) = min_j(λ_j t + c_j)

    参数在数据中点处中心化; 收敛后从最优点重启, 直到不再改进. 结果损失不超过初值损失.

    :param series: LogSeries 或 (x, z) 序列
    :param nu: 直线条数
    :param init: ν 条初始直线 (slope, intercept)
    :param loss_kind: 'l1' 或 'l2'
    :return: SegmentedFit(kind='min-of-lines')
    """

    _check_loss(loss_kind)

    if len(init) != nu:
        raise EpimonValidationException(f'初值需要 {nu} 条直线, 实际 {len(init)}')

    x, z = _xz(series)

    if x.size < 2:
        raise InsufficientDataError(f'至少需要 2 个点, 实际 {x.size}')

    centre = float(np.mean(x))
    xc = x - centre
    start = np.asarray([(s, c + s * centre) for s, c in init], dtype=float).ravel()

    def objective(p):
        lines = p.reshape(-1, 2)
        return _loss(np.min(lines[:, :1] * xc[None, :] + lines[:, 1:], axis=0) - z, loss_kind)

    options = {
        'maxiter': config.get('SEGFIT.MAXITER'),
        'xatol': config.get('SEGFIT.XATOL'),
        'fatol': config.get('SEGFIT.FATOL'),
    }

    best, f_best = start, objective(start)

    for attempt in range(config.get('SEGFIT.RESTARTS') + 1):
        result = minimize(objective, best, method='Nelder-Mead', options=options)
        logger.debug(f'Nelder-Mead 第 {attempt + 1} 轮: {result.nit} 次迭代, 损失 {result.fun:.6g}')

        if result.fun < f_best - LOSS_TIE_TOL * max(1.0, f_best):
            best, f_best = result.x, float(result.fun)
        else:
            break

    fitted = [(s, c - s * centre) for s, c in best.reshape(-1, 2)]

    candidate = _minlines_fit(fitted, x, z, loss_kind)
    initial = _minlines_fit(init, x, z, loss_kind)

    return candidate if candidate.loss <= initial.loss else initial


def fit_minlines(series, nu, loss_kind='l1') -> SegmentedFit:
    """dp 分段 -> 凹包络 -> Nelder-Mead 局部优化"""

    dp = fit_segmented_dp(series, nu, loss_kind)
    init = concave_envelope_init(list(dp.segments), dp.span)

    if len(init) < len(dp.segments):
        logger.debug(f'凹包络去掉了 {len(dp.segments) - len(init)} 条被支配的直线')

    return fit_minlines_local(series, len(init), init, loss_kind)


def tropical_fit(slopes: Sequence[float], breakpoints: Sequence[float], t0=0.0, end=None) -> SegmentedFit:
    """
    由各阶段斜率与切换时刻构造连续分段线性函数, 在 t0 处取值为 0

    斜率不增时为 min-of-lines, 否则为连续的 dp-segments.
    """

    slopes = [float(s) for s in slopes]
    breakpoints = [float(b) for b in breakpoints]

    if not slopes or len(breakpoints) != len(slopes) - 1:
        raise EpimonValidationException('需要 ν 个斜率与 ν-1 个切换时刻')

    if any(b <= a for a, b in zip(breakpoints, breakpoints[1:])):
        raise EpimonValidationException('切换时刻必须严格递增')

    intercepts = [-slopes[0] * t0]

    for s_prev, s_next, b in zip(slopes, slopes[1:], breakpoints):
        intercepts.append(intercepts[-1] + (s_prev - s_next) * b)

    segments = list(zip(slopes, intercepts))
    span = (float(t0), float(end if end is not None else (breakpoints[-1] if breakpoints else t0)))

    if all(a >= b for a, b in zip(slopes, slopes[1:])):
        return SegmentedFit('min-of-lines', 'l1', tuple(breakpoints), tuple(sorted(segments)), 0.0, span)

    return SegmentedFit('dp-segments', 'l1', tuple(breakpoints), tuple(segments), 0.0, span)


def tropical_check(y, fit: SegmentedFit, delta, tol=TROPICAL_TOL) -> Tuple[float, bool]:
    """
    优化全局偏移 γ 后的 sup |z - L(t) - γ|, 通过条件为不超过 Δ/2 + tol

    :param y: LogSeries 或 (x, z) 序列
    :param fit: 分段线性函数
    :param delta: Δ ≥ 0
    :return: (sup_deviation, pass)
    """

    if delta < 0:
        raise EpimonValidationException(f'Δ 必须非负: {delta}')

    x, z = _xz(y)
    residual = z - fit.evaluate(x)
    sup = float((residual.max() - residual.min()) / 2.0)

    return sup, bool(sup <= delta / 2.0 + tol)
