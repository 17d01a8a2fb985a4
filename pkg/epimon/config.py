import copy
import json
from pathlib import Path

from epimon.consts import CONFIG
from epimon.logger import logger
from epimon.utils import get_config_path

__all__ = ['setup', 'set', 'get', 'clone', 'update', 'reset', 'settings']

settings = copy.deepcopy(CONFIG)

CONF = get_config_path('config.json')


def setup(path=None):
    """
    将 json 配置文件合并到 settings 中

    :param path: 配置文件路径, 默认 ~/.epimon/config.json
    :return: bool，true 表示数据导入成功。
    """

    conf = Path(path) if path else CONF

    try:
        options = json.loads(conf.read_text(encoding='utf-8'))
        update(options)
    except FileNotFoundError:
        logger.warning(f'未找到配置文件 {conf}, 使用默认配置.')
        return False
    except json.JSONDecodeError as ex:
        logger.warning(f'配置文件 {conf} 格式错误: {ex}, 使用默认配置.')
        return False

    return True


def set(key, value):  # noqa
    """
    通过 key 设置某一项值, 支持 `ALARM.WINDOW` 形式

    :param key:
    :param value:
    :return:
    """

    keys = key.split('.')
    cfg = settings

    for x in keys[:-1]:
        cfg = cfg.setdefault(x, {})

    cfg[keys[-1]] = value


def get(key, default=None):
    """
    通过 key 获取值

    :param key: 如 `SPECTRAL.TOL`
    :param default:
    :return:
    """

    cfg = settings

    for x in key.split('.'):
        if not isinstance(cfg, dict) or x not in cfg:
            return default

        cfg = cfg[x]

    return cfg


def clone():
    """
    复制配置

    :return:
    """

    return copy.deepcopy(settings)


def update(options):
    """
    合并配置, 嵌套字典逐层合并

    :param options:
    :return:
    """

    def merge(dst, src):
        for k, v in src.items():
            if isinstance(v, dict) and isinstance(dst.get(k), dict):
                merge(dst[k], v)
            else:
                dst[k] = v

    merge(settings, options)


def reset():
    """恢复默认配置"""

    settings.clear()
    settings.update(copy.deepcopy(CONFIG))
