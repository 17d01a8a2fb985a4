from epimon.consts import EXIT_DATA
from epimon.consts import EXIT_NUMERIC
from epimon.consts import EXIT_USAGE


class EpimonException(Exception):
    """所有 epimon 异常的基类, 捕获它即可捕获全部错误"""

    exit_code = EXIT_USAGE

    def __init__(self, *args, **kwargs):
        """
        从 kwargs 中读取 ``message``, ``data`` 和 ``line``

        :param args: 第一个位置参数可直接作为 message
        :param kwargs: message, data, line
        """
        self.message = kwargs.get('message') or (str(args[0]) if args else self.__class__.__name__)
        self.data = kwargs.get('data')
        self.line = kwargs.get('line')

        super().__init__(self.message)

    def __str__(self):
        if self.line is not None:
            return f'第 {self.line} 行: {self.message}'

        return self.message

    def __repr__(self):
        return f'<EPIMONError: {self}>'


class EpimonValidationException(EpimonException):
    exit_code = EXIT_USAGE


class EpimonDataError(EpimonException):
    exit_code = EXIT_DATA


class InsufficientDataError(EpimonDataError):
    pass


class EpimonNumericalError(EpimonException):
    exit_code = EXIT_NUMERIC
