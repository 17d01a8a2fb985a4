from epimon.alarm import AlarmConfig
from epimon.alarm import monitor
from epimon.alarm import monitor_range
from epimon.tools.fixtures import resurgence_fixture

fixture = resurgence_fixture(seed=0, epoch='2020-01-01')
cfg = AlarmConfig.from_settings()

# 最后一天的预警
report = monitor(fixture.adv, fixture.disp, cfg)
print(report.to_dict())

# 逐日预警
for day, report in monitor_range(fixture.adv, fixture.disp, cfg):
    print(day, report.level if report else 'insufficient')
