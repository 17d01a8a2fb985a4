import logging
import sys
import warnings

from epimon import __version__
from epimon.consts import EXIT_USAGE
from epimon.logger import verbose as set_verbose
from epimon.runner import RunConfig
from epimon.runner import run

try:
    import click
    import matplotlib  # noqa: F401
    from prettytable import PrettyTable  # noqa: F401
except (ImportError, ModuleNotFoundError):
    logging.basicConfig(level=logging.WARNING)
    warnings.warn('!!! 缺少命令行依赖, 请使用此命令进行安装: pip install "epimon[cli]"', DeprecationWarning)
    logging.warning('!!! 缺少命令行依赖, 请使用此命令进行安装: pip install "epimon[cli]"')
    exit(-1)


class Entry(click.Group):
    """用法错误统一返回退出码 1"""

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as ex:
            ex.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as ex:
            ex.exit_code = EXIT_USAGE
            raise


def _run(ctx, command, **options):
    count = options.pop('verbose', 0)
    set_verbose(count)

    code = run(RunConfig(command, verbose=count, **options), echo=click.echo)
    ctx.exit(code)


out_option = click.option('-o', '--out', default='output', show_default=True, help='输出目录.')
verbose_option = click.option('-v', '--verbose', count=True, help='详细模式')


@click.group(cls=Entry)
@click.version_option(__version__, '-V', '--version', prog_name='epimon', message='%(prog)s: v%(version)s')
@click.help_option('-h', '--help')
def entry():
    ...


@entry.command(help='按场景配置模拟输运方程, 输出轨迹与观测量.')
@click.help_option('-h', '--help')
@click.option('-c', '--config', default=None, help='场景配置 json.')
@out_option
@verbose_option
@click.pass_context
def simulate(ctx, config, out, verbose):
    _run(ctx, 'simulate', config=config, out=out, verbose=verbose)


@entry.command(help='计算各阶段的 Perron 特征值、倍增时间与特征向量.')
@click.help_option('-h', '--help')
@click.option('-c', '--config', default=None, help='场景配置 json.')
@out_option
@verbose_option
@click.pass_context
def eig(ctx, config, out, verbose):
    _run(ctx, 'eig', config=config, out=out, verbose=verbose)


@entry.command(help='对数计数的分段线性拟合.')
@click.help_option('-h', '--help')
@click.option('-i', '--input', 'input_', default=None, help='date,count 或 date,z 格式的 CSV.')
@click.option('-c', '--config', default=None, help='覆盖默认配置的 json.')
@click.option('-n', '--nu', default=2, show_default=True, type=click.IntRange(min=1), help='段数上限 ν.')
@click.option('-l', '--loss', default='l1', show_default=True, type=click.Choice(['l1', 'l2']), help='损失函数.')
@click.option('-f', '--flavor', default='dp', show_default=True, type=click.Choice(['dp', 'minlines']), help='拟合形式 (dp: 动态规划分段, minlines: 直线取小).')
@out_option
@verbose_option
@click.pass_context
def fit(ctx, input_, config, nu, loss, flavor, out, verbose):
    _run(ctx, 'fit', input=input_, config=config, nu=nu, loss=loss, flavor=flavor, out=out, verbose=verbose)


@entry.command(help='评估 adv/disp 两个序列的预警级别.')
@click.help_option('-h', '--help')
@click.option('-i', '--input', 'input_', default=None, help='adv(医疗建议)计数 CSV.')
@click.option('-d', '--input-disp', default=None, help='disp(出车)计数 CSV.')
@click.option('-c', '--config', default=None, help='预警配置 json.')
@click.option('-a', '--as-of', default=None, help='评估日期 YYYY-MM-DD, 默认取最后一天.')
@click.option('-u', '--until', default=None, help='批量评估的结束日期 YYYY-MM-DD.')
@click.option('-m', '--model', default=None, type=click.Choice(['ols', 'l1']), help='噪声模型, 默认取配置.')
@out_option
@verbose_option
@click.pass_context
def monitor(ctx, input_, input_disp, config, as_of, until, model, out, verbose):
    _run(
        ctx,
        'monitor',
        input=input_,
        input_disp=input_disp,
        config=config,
        as_of=as_of,
        until=until,
        model=model,
        out=out,
        verbose=verbose,
    )


@entry.command(help='并发运行性质校验套件.')
@click.help_option('-h', '--help')
@click.option('-s', '--seed', default=0, show_default=True, type=click.IntRange(min=0), help='随机种子.')
@click.option('-q', '--quick', is_flag=True, default=False, help='缩小蒙特卡洛次数.')
@out_option
@verbose_option
@click.pass_context
def validate(ctx, seed, quick, out, verbose):
    _run(ctx, 'validate', seed=seed, quick=quick, out=out, verbose=verbose)


@entry.command(help='写出内置的合成数据.')
@click.help_option('-h', '--help')
@click.option('-s', '--seed', default=0, show_default=True, type=click.IntRange(min=0), help='随机种子.')
@out_option
@verbose_option
@click.pass_context
def bundle(ctx, seed, out, verbose):
    _run(ctx, 'bundle', seed=seed, out=out, verbose=verbose)


def main(args=None):
    """命令行入口, 返回退出码"""

    try:
        return entry.main(args=args, prog_name='epimon', standalone_mode=False) or 0
    except click.ClickException as ex:
        ex.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo('Aborted!', err=True)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
