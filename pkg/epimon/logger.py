import logging

formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

console = logging.StreamHandler()
console.setLevel(logging.INFO)
console.setFormatter(formatter)

logger = logging.getLogger('epimon')
logger.addHandler(console)
logger.setLevel(logging.INFO)


def verbose(count=0):
    """
    根据 -v 次数调整日志级别

    :param count: 0 保持 INFO, 1 及以上切换到 DEBUG
    :return: 当前级别
    """

    level = logging.DEBUG if count else logging.INFO

    console.setLevel(level)
    logger.setLevel(level)

    return level
