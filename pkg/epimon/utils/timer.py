import time
from functools import wraps

from epimon.logger import logger


def timeit(func):
    """记录函数耗时, 结果为 (返回值, 秒)"""

    @wraps(func)
    def decorator(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        delta = time.perf_counter() - start_time

        if delta > 1:
            t = f'{delta:.2f} s'
        else:
            t = f'{delta * 1000:.1f} ms'

        logger.debug(f'-> {func.__name__} 耗时: {t}')
        return result, delta

    return decorator
