from epimon import config
from epimon.utils import get_config_path

__version__ = '0.1.0'
__author__ = 'epimon developers'
