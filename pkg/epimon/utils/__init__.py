import datetime
import hashlib
import json
import math
import subprocess
from pathlib import Path

import numpy as np
import pandas as pd

from epimon.logger import logger


def get_config_path(config='config.json'):
    """
    配置文件路径, 位于用户目录 ~/.epimon 下

    :param config: 文件名
    :return: Path
    """

    return Path.home() / '.epimon' / config


def md5sum(filename):
    """
    文件的 md5 哈希值

    :param filename: 文件路径
    :return: mixed
    """

    try:
        md5_l = hashlib.md5()
        md5_l.update(Path(filename).read_bytes())
        return md5_l.hexdigest()
    except (IOError, FileNotFoundError) as e:
        logger.warning(e)
        return None


def config_hash(options):
    """
    配置的 md5 哈希值, 文件取字节, 字典取规范化 json

    :param options: 文件路径或 dict
    :return: str
    """

    if isinstance(options, (str, Path)):
        return md5sum(options)

    text = json.dumps(jsonable(options), sort_keys=True, ensure_ascii=False)
    return hashlib.md5(text.encode('utf-8')).hexdigest()


def git_describe():
    """当前仓库的 git describe, 不在仓库中时退回版本号"""

    from epimon import __version__

    try:
        ret = subprocess.run(
            ['git', 'describe', '--always', '--dirty', '--tags'],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return f'v{__version__}'

    return ret.stdout.strip() if ret.returncode == 0 and ret.stdout.strip() else f'v{__version__}'


def to_date(day, epoch):
    """
    日序号转换为日历日期

    :param day: 相对 epoch 的天数
    :param epoch: 'YYYY-MM-DD' 或 date
    :return: datetime.date
    """

    return as_date(epoch) + datetime.timedelta(days=int(round(day)))


def to_day(date, epoch):
    """日历日期转换为日序号"""

    return (as_date(date) - as_date(epoch)).days


def as_date(value):
    if isinstance(value, datetime.datetime):
        return value.date()

    if isinstance(value, datetime.date):
        return value

    return datetime.date.fromisoformat(str(value).strip())


def jsonable(value):
    """
    转换为可 json 序列化的对象, 非有限浮点数转为字符串

    :param value: mixed
    :return: mixed
    """

    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}

    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]

    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]

    if isinstance(value, (np.bool_, bool)):
        return bool(value)

    if isinstance(value, (np.integer, int)):
        return int(value)

    if isinstance(value, (np.floating, float)):
        value = float(value)

        if math.isnan(value):
            return None

        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'

        return value

    if isinstance(value, (datetime.date, datetime.datetime)):
        return value.isoformat()

    return value


def write_json(obj, filename):
    """
    确定性地写入 json 文件(键排序, 缩进 2)

    :param obj: 对象
    :param filename: 文件路径
    :return: Path
    """

    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)

    text = json.dumps(jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    filename.write_text(text + '\n', encoding='utf-8')

    logger.info(f'[√] 已写入 {filename}')
    return filename


def to_file(df, filename=None):
    """
    根据扩展名将 DataFrame 写入文件

    :param df: pd.DataFrame
    :param filename: 文件名, 支持 csv 和 json
    :return: Path 或 None
    """

    if filename is None or df is None:
        return None

    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)

    extension = filename.suffix.lower()

    if extension == '.csv':
        df.to_csv(filename, index=False, lineterminator='\n', float_format='%.10g')
    elif extension == '.json':
        df.to_json(filename, orient='records', force_ascii=False, indent=2)
    else:
        raise ValueError(f'不支持的文件格式: {extension}')

    logger.info(f'[√] 已写入 {filename}')
    return filename


def read_json(filename):
    return json.loads(Path(filename).read_text(encoding='utf-8'))


def frame_dates(days, epoch):
    """日序号序列转换为 ISO 日期字符串序列"""

    return pd.Index([to_date(d, epoch).isoformat() for d in days], name='date')
