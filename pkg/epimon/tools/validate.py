"""
性质校验套件

各套件相互独立, 通过 asyncio 在线程池中并发执行, 结果汇总为 {套件名: 结果}.
"""
import asyncio
import itertools
import math
from functools import partial
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from epimon.alarm import AlarmConfig
from epimon.alarm import combine
from epimon.alarm import coverage_experiment
from epimon.alarm import l1_fit
from epimon.alarm import monitor
from epimon.alarm import monitor_range
from epimon.alarm import ols_fit
from epimon.alarm import SlopeEstimate
from epimon.alarm import slope_positive_probability
from epimon.alarm import student_quantile
from epimon.consts import LEVELS
from epimon.engine import simulate
from epimon.exceptions import EpimonException
from epimon.exceptions import EpimonValidationException
from epimon.logger import logger
from epimon.model import DensityState
from epimon.model import ModelParams
from epimon.model import load_scenario
from epimon.segfit import fit_line
from epimon.segfit import fit_segmented_dp
from epimon.segfit import tropical_check
from epimon.segfit import tropical_fit
from epimon.series import ObservationSeries
from epimon.series import log_transform
from epimon.spectral import discrete_eigen
from epimon.spectral import eigen_residual
from epimon.spectral import eigenvector
from epimon.spectral import eigvec_distance_bound
from epimon.spectral import hilbert_distance
from epimon.spectral import mu_ratio_bound
from epimon.spectral import perron_eigenvalue
from epimon.spectral import tropical_bound_delta
from epimon.tools.fixtures import alarm_options
from epimon.tools.fixtures import closed_form_params
from epimon.tools.fixtures import closed_form_scenario
from epimon.tools.fixtures import decaying_fixture
from epimon.tools.fixtures import mu_for
from epimon.tools.fixtures import resurgence_fixture
from epimon.tools.fixtures import two_phase_series
from epimon.utils import write_json
from epimon.utils.timer import timeit


def closed_form_root(mu) -> float:
    """闭式模型 μ (1 - e^{-7λ})/λ e^{-3λ} = 1 的标量求根"""

    def f(lam):
        if abs(lam) < 1e-14:
            return math.log(mu * 7.0)

        return math.log(mu) + math.log(-math.expm1(-7.0 * lam) / lam) - 3.0 * lam

    return brentq(f, -5.0, 5.0, xtol=1e-15, rtol=1e-15)


def eigen_identity(quick=False, seed=0):
    params = closed_form_params(h=0.05)
    rows = {}

    for mu in (1 / 7, 2 / 7, 1 / 14):
        lam = perron_eigenvalue(params, mu)
        target = 0.0 if mu == 1 / 7 else closed_form_root(mu)
        residual = eigen_residual(params, eigenvector(params, lam, mu), mu)
        rows[f'{mu:.6f}'] = {'lambda': lam, 'target': target, 'error': abs(lam - target), 'residual': residual}

    return {'passed': all(r['error'] <= 1e-8 for r in rows.values()), 'cases': rows}


def growth_consistency(quick=False, seed=0):
    scenario = load_scenario(closed_form_scenario(mu=2 / 7, h=0.05, horizon=120))
    trajectory = simulate(scenario.params, scenario.init, 120, dt=scenario.dt, kernel=scenario.kernel)

    logs = trajectory.log_series()
    days = logs.x >= 80

    slope = ols_fit(logs.x[days], logs.values[days]).beta_hat
    lam = perron_eigenvalue(scenario.params, 2 / 7)
    error = abs(slope - lam) / abs(lam)

    return {'passed': error <= 0.02, 'slope': slope, 'lambda': lam, 'relative_error': error}


def tropical_bound(quick=False, seed=0):
    h = 0.1
    base = closed_form_params(h=h)
    mus = [mu_for(base, lam) for lam in (0.08, 0.01, -0.06)]

    params = ModelParams.factory(3.0, 7.0, h, 0.0, 0.0, 1.0, mu_schedule=[(0.0, mus[0]), (30.0, mus[1]), (60.0, mus[2])])
    phases = [discrete_eigen(params, mu, dt=h) for mu in mus]

    init = DensityState.from_profiles(params, n_E=1.0, n_I=1.0)
    trajectory = simulate(params, init, 90, dt=h)

    fit = tropical_fit([p.lam for p in phases], [30.0, 60.0], t0=0.0, end=90.0)
    bound = tropical_bound_delta(init, phases).delta
    sup, passed = tropical_check(trajectory.log_series(), fit, bound)

    return {'passed': passed, 'sup_deviation': sup, 'half_delta': bound / 2.0, 'slopes': [p.lam for p in phases]}


def eigvec_bound(quick=False, seed=0):
    rng = np.random.default_rng(seed)
    params = closed_form_params(h=0.05)
    worst = -math.inf
    passed = True

    for _ in range(10):
        mu1, mu2 = np.exp(rng.uniform(math.log(0.05), math.log(0.5), 2))
        lam1, lam2 = perron_eigenvalue(params, mu1), perron_eigenvalue(params, mu2)

        distance = hilbert_distance(eigenvector(params, lam1), eigenvector(params, lam2))
        slack = distance - eigvec_distance_bound(lam1, lam2, params)
        worst = max(worst, slack)

        passed &= slack <= 1e-6
        passed &= mu2 / mu1 <= mu_ratio_bound(lam1, lam2, params) * (1 + 1e-9)
        passed &= mu1 / mu2 <= mu_ratio_bound(lam2, lam1, params) * (1 + 1e-9)

    return {'passed': bool(passed), 'worst_slack': worst}


def brute_force_loss(x, z, nu, loss_kind):
    """枚举所有每段至少 2 点、至多 ν 段的划分"""

    n = len(x)
    cache = {}
    best = math.inf

    def cost(a, b):
        if (a, b) not in cache:
            cache[a, b] = fit_line(zip(x[a:b], z[a:b]), loss_kind)[2]

        return cache[a, b]

    for k in range(1, nu + 1):
        for cuts in itertools.combinations(range(2, n - 1), k - 1):
            bounds = [0, *cuts, n]

            if any(b - a < 2 for a, b in zip(bounds, bounds[1:])):
                continue

            best = min(best, sum(cost(a, b) for a, b in zip(bounds, bounds[1:])))

    return best


def dp_optimality(quick=False, seed=0):
    rng = np.random.default_rng(seed)
    reps = 40 if quick else 200
    worst = 0.0

    for _ in range(reps):
        n = int(rng.integers(4, 15))
        nu = min(int(rng.integers(1, 4)), n // 2)

        x = np.arange(n, dtype=float)
        z = np.cumsum(rng.normal(0.0, 0.3, n))

        for loss_kind in ('l1', 'l2'):
            fit = fit_segmented_dp(list(zip(x, z)), nu, loss_kind)
            brute = brute_force_loss(x, z, nu, loss_kind)
            worst = max(worst, abs(fit.loss - brute) / max(1.0, brute))

    return {'passed': worst <= 1e-9, 'instances': reps, 'worst_gap': worst}


COVERAGE_REPS = 10000
COVERAGE_TOL = 0.02
LARGE_WINDOW = 150


def ci_coverage(quick=False, seed=0):
    """
    区间覆盖率: 10000 次重复时要求 |覆盖率 - (1-ε)| ≤ 0.02, 次数减少时容差按 √(10000/reps) 放大

    δ 区间在大窗口 (n=150) 下检验; 告警窗口 (n=10) 的覆盖率只报告, 不修正.
    """

    reps = 2000 if quick else COVERAGE_REPS
    tol = COVERAGE_TOL * math.sqrt(COVERAGE_REPS / reps)
    target = 0.95

    beta = coverage_experiment('beta-gauss', reps=reps, seed=seed)
    delta = coverage_experiment('delta-laplace', n=LARGE_WINDOW, reps=reps, seed=seed)
    window = coverage_experiment('delta-laplace', reps=reps, seed=seed)

    if abs(window.coverage - target) > tol:
        logger.warning(f'告警窗口 (n=10) 的 δ 区间覆盖率 {window.coverage:.4f} 偏离 {target}')

    return {
        'passed': abs(beta.coverage - target) <= tol and abs(delta.coverage - target) <= tol,
        'tolerance': tol,
        'beta_gauss': beta.coverage,
        'delta_laplace': delta.coverage,
        'delta_laplace_window': window.coverage,
    }


def combination(quick=False, seed=0):
    estimates = [SlopeEstimate('laplace-l1', b, 0.0, 1.0, v, 10, 8, 4.5, 82.5) for b, v in ((0.1, 1.0), (0.3, 3.0))]
    merged = combine(estimates)

    weights = np.linspace(0.0, 1.0, 1001)
    variance = weights ** 2 * 1.0 + (1 - weights) ** 2 * 3.0
    w_best = float(weights[np.argmin(variance)])

    passed = abs(merged.beta_hat - 0.15) <= 1e-12 and abs(merged.V - 0.75) <= 1e-12 and abs(w_best - 0.75) <= 1e-3
    return {'passed': passed, 'beta_hat': merged.beta_hat, 'V': merged.V, 'best_weight': w_best}


def quantiles(quick=False, seed=0):
    values = {'0.975': student_quantile(0.975, 5), '0.95': student_quantile(0.95, 5)}
    passed = abs(values['0.975'] - 2.571) <= 5e-4 and abs(values['0.95'] - 2.015) <= 5e-4

    return {'passed': passed, 'df5': values}


def first_days(levels):
    """首次达到 warning, alarm, confirmed 的位置"""

    ranks = [LEVELS.index(level) for level in levels]
    return [next((i for i, r in enumerate(ranks) if r >= k), None) for k in (1, 2, 3)]


def alarm_sequencing(quick=False, seed=0):
    cfg = AlarmConfig.from_dict(alarm_options())

    resurgence = resurgence_fixture(seed)
    levels = [r.level for _, r in monitor_range(resurgence.adv, resurgence.disp, cfg) if r is not None]
    firsts = first_days(levels)

    ordered = levels[0] == 'none' and None not in firsts and firsts[0] < firsts[1] < firsts[2]

    decaying = decaying_fixture(seed)
    quiet = [r.level for _, r in monitor_range(decaying.adv, decaying.disp, cfg) if r is not None]

    return {
        'passed': bool(ordered) and all(level == 'none' for level in quiet),
        'first_warning_alarm_confirmed': firsts,
        'decaying_max': max(quiet, key=LEVELS.index) if quiet else None,
    }


def _scaled(series, factor):
    return ObservationSeries(series.label, series.days, [c * factor for c in series.counts], series.epoch)


def equivariance(quick=False, seed=0):
    counts = two_phase_series(seed)
    logs, scaled = log_transform(counts), log_transform(_scaled(counts, 10))

    slope_gap = max(
        abs(fit(logs.x, logs.values).beta_hat - fit(scaled.x, scaled.values).beta_hat) for fit in (ols_fit, l1_fit)
    )

    p_gap = abs(slope_positive_probability(l1_fit(logs.x, logs.values)) - slope_positive_probability(l1_fit(scaled.x, scaled.values)))

    fixture = resurgence_fixture(seed)
    cfg = AlarmConfig.from_dict(alarm_options())
    as_of = fixture.adv.days[-1]
    same_level = monitor(fixture.adv, fixture.disp, cfg, as_of).level == monitor(_scaled(fixture.adv, 10), _scaled(fixture.disp, 10), cfg, as_of).level

    base = fit_segmented_dp(logs, 2)
    lifted = fit_segmented_dp(logs.shift(z=math.log(10)), 2)
    moved = fit_segmented_dp(logs.shift(days=7), 2)

    segfit_ok = (
        base.breakpoints == lifted.breakpoints
        and np.allclose(base.slopes, lifted.slopes, rtol=0, atol=1e-9)
        and tuple(b + 7 for b in base.breakpoints) == moved.breakpoints
        and np.allclose(base.slopes, moved.slopes, rtol=0, atol=1e-9)
    )

    return {
        'passed': bool(slope_gap <= 1e-12 and p_gap <= 1e-9 and same_level and segfit_ok),
        'slope_gap': slope_gap,
        'p_gap': p_gap,
        'breakpoints': list(base.breakpoints),
    }


def nonlinear_conservation(quick=False, seed=0):
    h = dt = 0.05
    params = ModelParams.factory(3.0, 7.0, h, 0.3, 0.25, 1.0, mu=0.5)
    init = DensityState.from_profiles(params, 0.0, {'type': 'triangular', 'center': 1.0, 'width': 2.0, 'height': 5.0}, S=1000.0)

    trajectory = simulate(params, init, 60, dt=dt, nonlinear=True)
    totals = np.asarray([s.N for s in trajectory.states])
    drift = float(np.max(np.abs(totals - totals[0])) / totals[0])

    return {'passed': drift <= 5 * (h + dt), 'relative_drift': drift}


SUITES = {
    'eigen_identity': eigen_identity,
    'growth_consistency': growth_consistency,
    'tropical_bound': tropical_bound,
    'eigvec_bound': eigvec_bound,
    'dp_optimality': dp_optimality,
    'ci_coverage': ci_coverage,
    'combination': combination,
    'quantiles': quantiles,
    'alarm_sequencing': alarm_sequencing,
    'equivariance': equivariance,
    'nonlinear_conservation': nonlinear_conservation,
}


def run_suite(name, quick=False, seed=0) -> dict:
    """运行单个套件, 异常记为失败"""

    try:
        result, seconds = timeit(SUITES[name])(quick=quick, seed=seed)
    except (EpimonException, ArithmeticError, ValueError) as ex:
        logger.warning(f'[×] {name}: {ex}')
        return {'passed': False, 'error': str(ex)}

    result['passed'] = bool(result['passed'])
    logger.debug(f'{name}: {"通过" if result["passed"] else "失败"}, 耗时 {seconds:.2f} s')

    if not result['passed']:
        logger.warning(f'[×] 校验失败: {name}')

    return result


async def _suite(name, quick, seed):
    return name, await asyncio.get_running_loop().run_in_executor(None, partial(run_suite, name, quick=quick, seed=seed))


async def _batch(names, quick, seed):
    return await asyncio.gather(*[_suite(name, quick, seed) for name in names])


def run_suites(names=None, quick=False, seed=0) -> dict:
    """
    并发运行校验套件

    :param names: 套件名列表, 默认全部
    :param quick: 缩小蒙特卡洛次数
    :param seed: 随机种子
    :return: {套件名: 结果}
    """

    names = list(names or SUITES)
    unknown = [name for name in names if name not in SUITES]

    if unknown:
        raise EpimonValidationException(f'未知的校验套件: {unknown}')

    return dict(asyncio.run(_batch(names, quick, seed)))


def validate(output=None, names=None, quick=False, seed=0) -> dict:
    """
    运行校验并写入 validate.json

    :param output: 输出目录, 为空时不写文件
    :return: {'passed', 'quick', 'seed', 'suites'}
    """

    suites = run_suites(names, quick, seed)

    report = {
        'passed': all(r['passed'] for r in suites.values()),
        'quick': bool(quick),
        'seed': int(seed),
        'suites': suites,
    }

    if output is not None:
        write_json(report, Path(output) / 'validate.json')

    return report


__all__ = ('SUITES', 'run_suite', 'run_suites', 'validate', 'brute_force_loss', 'closed_form_root')
