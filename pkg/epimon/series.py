import csv
import datetime
import io
import math
import re
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
import pandas as pd

from epimon import config
from epimon.exceptions import EpimonDataError
from epimon.exceptions import EpimonValidationException
from epimon.exceptions import InsufficientDataError
from epimon.logger import logger
from epimon.utils import as_date
from epimon.utils import frame_dates

DATE_RE = re.compile(r'\d{4}-\d{2}-\d{2}')
COUNT_RE = re.compile(r'[+-]?\d+')


def _epoch(epoch=None):
    return as_date(epoch or config.get('EPOCH')).isoformat()


@dataclass(frozen=True)
class ObservationSeries:
    """按日的事件计数序列

    days 为相对 epoch 的整数日序号, 严格递增; counts 为非负整数.
    """

    label: str
    days: Tuple[int, ...]
    counts: Tuple[int, ...]
    epoch: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        days = tuple(int(d) for d in self.days)
        counts = tuple(int(c) for c in self.counts)

        if len(days) != len(counts):
            raise EpimonValidationException(f'{self.label}: 日期与计数长度不一致')

        if any(b <= a for a, b in zip(days, days[1:])):
            raise EpimonValidationException(f'{self.label}: 日序号必须严格递增')

        if any(c < 0 for c in counts):
            raise EpimonDataError(f'{self.label}: 计数不能为负')

        object.__setattr__(self, 'days', days)
        object.__setattr__(self, 'counts', counts)
        object.__setattr__(self, 'epoch', _epoch(self.epoch))

    @classmethod
    def from_points(cls, label, points, epoch=None):
        points = list(points)
        return cls(label, tuple(p[0] for p in points), tuple(p[1] for p in points), epoch)

    @property
    def points(self) -> List[Tuple[int, int]]:
        return list(zip(self.days, self.counts))

    def __len__(self):
        return len(self.days)

    def to_series(self) -> pd.Series:
        return pd.Series(self.counts, index=pd.Index(self.days, name='day'), name=self.label, dtype='int64')

    def to_frame(self) -> pd.DataFrame:
        """以 ISO 日期为索引的 DataFrame"""

        return pd.DataFrame({'count': list(self.counts)}, index=frame_dates(self.days, self.epoch))

    def to_csv(self) -> str:
        """规范化 CSV: 表头 date,count, LF 换行"""

        return self.to_frame().reset_index().to_csv(index=False, lineterminator='\n')


@dataclass(frozen=True)
class LogSeries:
    """对数计数序列 z = ln(count), 只包含 count > 0 的日期"""

    label: str
    days: Tuple[int, ...]
    z: Tuple[float, ...]
    epoch: Optional[str] = field(default=None, compare=False)
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        days = tuple(int(d) for d in self.days)
        z = tuple(float(v) for v in self.z)

        if len(days) != len(z):
            raise EpimonValidationException(f'{self.label}: 日期与取值长度不一致')

        if any(b <= a for a, b in zip(days, days[1:])):
            raise EpimonValidationException(f'{self.label}: 日序号必须严格递增')

        if not all(math.isfinite(v) for v in z):
            raise EpimonDataError(f'{self.label}: 对数值必须有限')

        object.__setattr__(self, 'days', days)
        object.__setattr__(self, 'z', z)
        object.__setattr__(self, 'epoch', _epoch(self.epoch))

    @property
    def points(self) -> List[Tuple[int, float]]:
        return list(zip(self.days, self.z))

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.days, dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float)

    def __len__(self):
        return len(self.days)

    def shift(self, days=0, z=0.0):
        """时间平移 days 天, 纵向平移 z"""

        return LogSeries(self.label, [d + days for d in self.days], [v + z for v in self.z], self.epoch, self.dropped)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'z': list(self.z)}, index=frame_dates(self.days, self.epoch))

    def to_csv(self) -> str:
        return self.to_frame().reset_index().to_csv(index=False, lineterminator='\n', float_format='%.12g')


def _read(text):
    if hasattr(text, 'read'):
        text = text.read()

    if isinstance(text, bytes):
        text = text.decode('utf-8')

    return text.lstrip('\ufeff').replace('\r\n', '\n').split('\n')


def _rows(text, header):
    """逐行解析, 返回 (行号, 日期, 原始取值); 表头可省略"""

    seen = {}
    first = True

    for lineno, row in enumerate(csv.reader(_read(text)), 1):
        if not row or all(not c.strip() for c in row):
            continue

        cells = [c.strip() for c in row]

        if first and [c.lower() for c in cells] == list(header):
            first = False
            continue

        first = False

        if len(cells) != 2:
            raise EpimonDataError(f'格式错误, 需要 {",".join(header)} 两列', line=lineno)

        if not DATE_RE.fullmatch(cells[0]):
            raise EpimonDataError(f'日期格式错误: {cells[0]!r}', line=lineno)

        try:
            date = datetime.date.fromisoformat(cells[0])
        except ValueError:
            raise EpimonDataError(f'无效日期: {cells[0]!r}', line=lineno)

        if date in seen:
            raise EpimonDataError(f'日期重复: {date} (首次出现于第 {seen[date]} 行)', line=lineno)

        seen[date] = lineno
        yield lineno, date, cells[1]


def parse_csv(text, label='series', epoch=None) -> ObservationSeries:
    """
    解析 date,count 格式的 CSV

    :param text: 字符串或文件对象, UTF-8, LF 或 CRLF
    :param label: 序列名称
    :param epoch: 第 0 天的日期, 默认取配置 EPOCH
    :return: ObservationSeries
    """

    epoch = _epoch(epoch)
    points = []

    for lineno, date, raw in _rows(text, ('date', 'count')):
        if not COUNT_RE.fullmatch(raw):
            raise EpimonDataError(f'计数必须为十进制整数: {raw!r}', line=lineno)

        count = int(raw)

        if count < 0:
            raise EpimonDataError(f'计数为负: {count}', line=lineno)

        points.append(((date - as_date(epoch)).days, count))

    if not points:
        raise EpimonDataError(f'{label}: 没有数据行')

    points.sort()
    return ObservationSeries.from_points(label, points, epoch)


def parse_log_csv(text, label='series', epoch=None) -> LogSeries:
    """解析 date,z 格式的对数序列 CSV"""

    epoch = _epoch(epoch)
    points = []

    for lineno, date, raw in _rows(text, ('date', 'z')):
        try:
            z = float(raw)
        except ValueError:
            raise EpimonDataError(f'取值必须为实数: {raw!r}', line=lineno)

        if not math.isfinite(z):
            raise EpimonDataError(f'取值必须有限: {raw!r}', line=lineno)

        points.append(((date - as_date(epoch)).days, z))

    if not points:
        raise EpimonDataError(f'{label}: 没有数据行')

    points.sort()
    return LogSeries(label, [p[0] for p in points], [p[1] for p in points], epoch)


def aggregate(series: Sequence[ObservationSeries], label=None) -> ObservationSeries:
    """
    逐日求和, 某序列缺失的日期按 0 计

    :param series: 序列列表
    :param label: 结果名称, 默认按名称排序后用 + 连接
    :return: ObservationSeries
    """

    if not series:
        raise EpimonValidationException('aggregate 需要至少一个序列')

    for s in series:
        if not len(s):
            raise EpimonValidationException(f'序列 {s.label} 为空')

    epochs = {s.epoch for s in series}

    if len(epochs) > 1:
        raise EpimonValidationException(f'序列的 epoch 不一致: {sorted(epochs)}')

    total = pd.concat([s.to_series() for s in series], axis=1).fillna(0).sum(axis=1).sort_index()
    label = label or '+'.join(sorted(s.label for s in series))

    return ObservationSeries(label, tuple(total.index), tuple(int(round(v)) for v in total.values), series[0].epoch)


def window(series: ObservationSeries, last_n: int, end_day: int) -> ObservationSeries:
    """
    截取 (end_day - last_n, end_day] 内的点

    :param series: 序列
    :param last_n: 窗口天数, 至少 2
    :param end_day: 窗口最后一天
    :return: ObservationSeries
    """

    if last_n < 2:
        raise EpimonValidationException(f'窗口天数至少为 2, 实际 {last_n}')

    points = [(d, c) for d, c in series.points if end_day - last_n < d <= end_day]

    if len(points) < 2:
        raise InsufficientDataError(f'{series.label}: 窗口内只有 {len(points)} 个点', data={'end_day': end_day})

    return ObservationSeries.from_points(series.label, points, series.epoch)


def log_transform(series: ObservationSeries) -> LogSeries:
    """
    取自然对数, 计数为 0 的日期被丢弃并计入 dropped

    :param series: 序列
    :return: LogSeries
    """

    if not len(series):
        raise EpimonValidationException(f'{series.label}: 序列为空')

    counts = np.asarray(series.counts, dtype=float)
    keep = counts > 0

    if not keep.any():
        raise EpimonDataError(f'{series.label}: 全部计数为零, 无法取对数')

    dropped = int((~keep).sum())

    if dropped:
        logger.debug(f'{series.label}: 丢弃 {dropped} 个零计数日')

    days = np.asarray(series.days)[keep]
    return LogSeries(series.label, days.tolist(), np.log(counts[keep]).tolist(), series.epoch, dropped)


def read_series(filename, label=None, epoch=None):
    """从文件读取计数序列, 名称默认取文件名"""

    filename = Path(filename)
    return parse_csv(io.StringIO(filename.read_text(encoding='utf-8')), label or filename.stem, epoch)
