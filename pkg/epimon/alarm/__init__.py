from epimon.alarm.estimate import GaussianIntervals
from epimon.alarm.estimate import Intervals
from epimon.alarm.estimate import SlopeEstimate
from epimon.alarm.estimate import combine
from epimon.alarm.estimate import confidence_intervals
from epimon.alarm.estimate import gaussian_intervals
from epimon.alarm.estimate import l1_fit
from epimon.alarm.estimate import ols_fit
from epimon.alarm.estimate import prediction_band
from epimon.alarm.estimate import slope_positive_probability
from epimon.alarm.estimate import student_cdf
from epimon.alarm.estimate import student_quantile
from epimon.alarm.estimate import trapezoid_domain
from epimon.alarm.monitor import AlarmConfig
from epimon.alarm.monitor import AlarmReport
from epimon.alarm.monitor import CoverageResult
from epimon.alarm.monitor import DeltaIntervals
from epimon.alarm.monitor import Needles
from epimon.alarm.monitor import alarm_level
from epimon.alarm.monitor import coverage_experiment
from epimon.alarm.monitor import delta_confidence
from epimon.alarm.monitor import doubling_level
from epimon.alarm.monitor import doubling_odds
from epimon.alarm.monitor import doubling_time_alarm
from epimon.alarm.monitor import interval_alarm_level
from epimon.alarm.monitor import monitor
from epimon.alarm.monitor import monitor_range
from epimon.alarm.monitor import slope_needles
