"""
命令执行: 读取输入, 调用各模块, 写出 JSON/CSV/SVG 产物并返回退出码
"""
import datetime
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from typing import Optional

import numpy as np
import pandas as pd

from epimon import config as settings
from epimon.consts import EXIT_NUMERIC
from epimon.consts import EXIT_OK
from epimon.consts import EXIT_USAGE
from epimon.exceptions import EpimonException
from epimon.exceptions import EpimonValidationException
from epimon.logger import logger
from epimon.series import log_transform
from epimon.series import parse_csv
from epimon.series import parse_log_csv
from epimon.utils import as_date
from epimon.utils import config_hash
from epimon.utils import frame_dates
from epimon.utils import md5sum
from epimon.utils import read_json
from epimon.utils import to_date
from epimon.utils import to_day
from epimon.utils import to_file
from epimon.utils import write_json

COMMANDS = ('simulate', 'eig', 'fit', 'monitor', 'validate', 'bundle')


@dataclass
class RunConfig:
    """一次命令行调用的全部参数"""

    command: str
    input: Optional[Path] = None
    input_disp: Optional[Path] = None
    config: Optional[Path] = None
    out: Path = Path('output')
    as_of: Optional[str] = None
    until: Optional[str] = None
    seed: int = 0
    model: Optional[str] = None
    nu: int = 2
    loss: str = 'l1'
    flavor: str = 'dp'
    quick: bool = False
    verbose: int = 0

    def __post_init__(self):
        for name in ('input', 'input_disp', 'config'):
            value = getattr(self, name)
            setattr(self, name, Path(value) if value is not None else None)

        self.out = Path(self.out)

    def check(self):
        """命令名合法, 引用的路径存在, 输出目录可写"""

        if self.command not in COMMANDS:
            raise EpimonValidationException(f'未知的命令 {self.command!r}, 可选 {COMMANDS}')

        if int(self.seed) != self.seed or self.seed < 0:
            raise EpimonValidationException(f'seed 必须为非负整数: {self.seed}')

        for name in ('input', 'input_disp', 'config'):
            path = getattr(self, name)

            if path is not None and not path.is_file():
                raise EpimonValidationException(f'文件不存在: {path}')

        self.out.mkdir(parents=True, exist_ok=True)

        if not os.access(self.out, os.W_OK):
            raise EpimonValidationException(f'输出目录不可写: {self.out}')

    def digest(self) -> str:
        """与路径无关的配置哈希, 文件取内容的 md5"""

        options = {
            'command': self.command,
            'as_of': self.as_of,
            'until': self.until,
            'seed': self.seed,
            'model': self.model,
            'nu': self.nu,
            'loss': self.loss,
            'flavor': self.flavor,
            'quick': self.quick,
            'settings': settings.clone(),
        }

        for name in ('input', 'input_disp', 'config'):
            path = getattr(self, name)
            options[name] = md5sum(path) if path else None

        return config_hash(options)

    def require(self, name):
        value = getattr(self, name)

        if value is None:
            option = '--' + name.replace('_', '-')
            raise EpimonValidationException(f'{self.command} 需要参数 {option}')

        return value


def iso_time(day, epoch) -> str:
    """整数日为 ISO 日期, 小数日精确到分钟"""

    day = float(day)

    if day == round(day):
        return to_date(day, epoch).isoformat()

    moment = datetime.datetime.combine(as_date(epoch), datetime.time()) + datetime.timedelta(days=day)
    return moment.isoformat(timespec='minutes')


def parse_day(value, epoch):
    """ISO 日期转换为日序号"""

    try:
        return to_day(value, epoch)
    except ValueError:
        raise EpimonValidationException(f'日期格式错误: {value!r}, 需要 YYYY-MM-DD')


def read_logs(filename, epoch=None):
    """读取 date,count 或 date,z 格式的 CSV, 返回对数序列"""

    filename = Path(filename)
    text = filename.read_text(encoding='utf-8')
    header = next((line for line in text.lstrip('\ufeff').splitlines() if line.strip()), '')

    if header.replace(' ', '').lower() == 'date,z':
        return parse_log_csv(text, filename.stem, epoch)

    return log_transform(parse_csv(text, filename.stem, epoch))


def _table(fields, rows):
    from prettytable import PrettyTable

    t = PrettyTable(fields)

    for name in fields:
        t.align[name] = 'l'

    for row in rows:
        t.add_row(row)

    return t


def _fmt(value, spec='.6g'):
    return format(value, spec) if isinstance(value, float) else str(value)


def do_simulate(cfg: RunConfig, echo):
    from epimon.engine import simulate
    from epimon.model import load_scenario

    scenario = load_scenario(cfg.require('config'))
    trajectory = simulate(
        scenario.params,
        scenario.init,
        scenario.horizon,
        scenario.dt,
        scenario.kernel,
        scenario.nonlinear,
        progress=bool(cfg.verbose),
        epoch=scenario.epoch,
    )

    to_file(trajectory.to_frame(), cfg.out / 'trajectory.csv')

    observable = pd.DataFrame({'Y': trajectory.values}, index=frame_dates(trajectory.times, scenario.epoch)).reset_index()
    to_file(observable, cfg.out / 'observable.csv')

    if echo:
        final = trajectory.final
        echo(f'{scenario.name}: {len(trajectory)} 天, S={final.S:.6g} E={final.E:.6g} I={final.I:.6g} R={final.R:.6g}')


def do_eig(cfg: RunConfig, echo):
    from epimon.model import load_scenario
    from epimon.spectral import discrete_eigen
    from epimon.spectral import eigen_residual
    from epimon.spectral import eigenvector
    from epimon.spectral import eigvec_distance_bound
    from epimon.spectral import hilbert_distance
    from epimon.spectral import mu_ratio_bound
    from epimon.spectral import perron_eigenvalue
    from epimon.spectral import tropical_bound_delta

    scenario = load_scenario(cfg.require('config'))
    params = scenario.params
    phases, solutions = [], []

    for k, (start, mu) in enumerate(params.mu_schedule):
        lam = perron_eigenvalue(params, mu)
        solution = eigenvector(params, lam, mu)
        discrete = discrete_eigen(params, mu, scenario.dt)

        vector = pd.DataFrame(
            {
                'compartment': ['E'] * params.m_E + ['I'] * params.m_I,
                'age': np.concatenate([params.ages_E, params.ages_I]),
                'value': solution.vector(),
            }
        )
        to_file(vector, cfg.out / f'eigvec_{k}.csv')

        solutions.append(solution)
        phases.append(
            {
                'index': k,
                'start': iso_time(start, scenario.epoch),
                'mu': mu,
                'lambda': lam,
                'doubling_time': solution.doubling_time,
                'discrete_lambda': discrete.lam,
                'residual': eigen_residual(params, solution, mu),
                'eigvec': f'eigvec_{k}.csv',
            }
        )

    bounds = []

    for k in range(1, len(phases)):
        u, w = solutions[k - 1], solutions[k]
        bounds.append(
            {
                'from': k - 1,
                'to': k,
                'hilbert_distance': hilbert_distance(u, w),
                'distance_bound': eigvec_distance_bound(u.lam, w.lam, params),
                'mu_ratio': w.mu / u.mu,
                'mu_ratio_bound': mu_ratio_bound(u.lam, w.lam, params),
            }
        )

    init = scenario.init.vector()
    delta = tropical_bound_delta(init, solutions).delta if np.all(init > 0) else None

    if delta is None:
        logger.info('初始密度不是严格正的, 不计算 Δ')

    write_json(
        {'scenario': scenario.name, 'epoch': scenario.epoch, 'phases': phases, 'bounds': bounds, 'tropical_delta': delta},
        cfg.out / 'eig.json',
    )

    if echo:
        rows = [[p['index'], p['start'], _fmt(p['mu']), _fmt(p['lambda']), _fmt(p['doubling_time']), _fmt(p['discrete_lambda'])] for p in phases]
        echo(_table(['phase', 'start', 'mu', 'lambda', 'delta', 'discrete'], rows))


def do_fit(cfg: RunConfig, echo):
    from epimon.chart import fit_chart
    from epimon.segfit import fit_minlines
    from epimon.segfit import fit_segmented_dp

    if cfg.config is not None:
        settings.update(read_json(cfg.config))

    if cfg.flavor not in ('dp', 'minlines'):
        raise EpimonValidationException(f'未知的拟合形式 {cfg.flavor!r}')

    logs = read_logs(cfg.require('input'), settings.get('EPOCH'))

    if cfg.flavor == 'dp':
        fit = fit_segmented_dp(logs, cfg.nu, cfg.loss)
    else:
        fit = fit_minlines(logs, cfg.nu, cfg.loss)

    pieces = [
        {
            'start': iso_time(p['start'], logs.epoch),
            'end': iso_time(p['end'], logs.epoch),
            'slope': p['slope'],
            'doubling_time': p['doubling_time'],
        }
        for p in fit.pieces()
    ]

    write_json(
        {
            'input': logs.label,
            'kind': fit.kind,
            'loss_kind': fit.loss_kind,
            'nu': cfg.nu,
            'loss': fit.loss,
            'dropped': logs.dropped,
            'span': [iso_time(d, logs.epoch) for d in fit.span],
            'breakpoints': [iso_time(b, logs.epoch) for b in fit.breakpoints],
            'slopes': fit.slopes,
            'pieces': pieces,
        },
        cfg.out / 'fit.json',
    )

    fit_chart(logs, fit, cfg.out / 'fit.svg', cfg.digest())

    if echo:
        echo(_table(['start', 'end', 'slope', 'doubling'], [[p['start'], p['end'], _fmt(p['slope']), _fmt(p['doubling_time'])] for p in pieces]))


def _alarm_config(cfg: RunConfig):
    from epimon.alarm import AlarmConfig

    if cfg.config is None:
        return AlarmConfig.from_settings()

    options = read_json(cfg.config)
    return AlarmConfig.from_dict(options.get('ALARM', options))


def do_monitor(cfg: RunConfig, echo):
    from epimon.alarm import monitor
    from epimon.alarm import monitor_range
    from epimon.chart import monitor_chart
    from epimon.series import read_series

    alarm = _alarm_config(cfg)
    epoch = settings.get('EPOCH')

    adv = read_series(cfg.require('input'), epoch=epoch)
    disp = read_series(cfg.require('input_disp'), epoch=epoch)

    if cfg.until is None:
        as_of = parse_day(cfg.as_of, epoch) if cfg.as_of else None
        report = monitor(adv, disp, alarm, as_of, cfg.model)
        reports = [(report.as_of, report)]
        write_json(report.to_dict(), cfg.out / 'monitor.json')
    else:
        start = parse_day(cfg.as_of, epoch) if cfg.as_of else None
        reports = monitor_range(adv, disp, alarm, start, parse_day(cfg.until, epoch), cfg.model, progress=bool(cfg.verbose))

        entries = [r.to_dict() if r else {'as_of': to_date(d, epoch).isoformat(), 'status': 'insufficient'} for d, r in reports]
        write_json(entries, cfg.out / 'monitor.json')

    monitor_chart(adv, disp, reports, alarm, cfg.out / 'monitor.svg', cfg.digest())

    if echo:
        rows = [
            [to_date(d, epoch).isoformat(), _fmt(r.p_adv_plus, '.4f'), _fmt(r.p_disp_plus, '.4f'), r.level, r.doubling_level]
            if r
            else [to_date(d, epoch).isoformat(), '-', '-', 'insufficient', '-']
            for d, r in reports
        ]
        echo(_table(['date', 'p_adv', 'p_disp', 'level', 'doubling'], rows))


def do_validate(cfg: RunConfig, echo):
    from epimon.tools.validate import validate

    report = validate(cfg.out, quick=cfg.quick, seed=cfg.seed)

    if echo:
        echo(_table(['suite', 'passed'], [[name, '√' if r['passed'] else '×'] for name, r in report['suites'].items()]))

    return EXIT_OK if report['passed'] else EXIT_NUMERIC


def do_bundle(cfg: RunConfig, echo):
    from epimon.tools.fixtures import bundle

    files = bundle(cfg.out, cfg.seed, settings.get('EPOCH'))

    if echo:
        echo('\n'.join(str(f) for f in files))


HANDLERS = {
    'simulate': do_simulate,
    'eig': do_eig,
    'fit': do_fit,
    'monitor': do_monitor,
    'validate': do_validate,
    'bundle': do_bundle,
}


def run(cfg: RunConfig, echo: Callable = None) -> int:
    """
    执行命令

    :param cfg: RunConfig
    :param echo: 输出表格与摘要的函数, 为空时不输出
    :return: 退出码 0 成功, 1 用法错误, 2 数据错误, 3 数值失败
    """

    try:
        cfg.check()
        code = HANDLERS[cfg.command](cfg, echo)
    except EpimonException as ex:
        logger.error(f'[×] {cfg.command}: {ex}')
        return ex.exit_code
    except (OSError, UnicodeDecodeError) as ex:
        logger.error(f'[×] {cfg.command}: {ex}')
        return EXIT_USAGE

    return EXIT_OK if code is None else code


__all__ = ('RunConfig', 'run', 'read_logs', 'iso_time', 'COMMANDS')
