from epimon.segfit import fit_minlines
from epimon.segfit import fit_segmented_dp
from epimon.series import log_transform
from epimon.tools.fixtures import two_phase_series

logs = log_transform(two_phase_series(seed=0))

# 动态规划分段, 最多 2 段
fit = fit_segmented_dp(logs, 2, 'l1')
print(fit.breakpoints, fit.slopes)

# 直线取小(连续)
fit = fit_minlines(logs, 2, 'l1')

for piece in fit.pieces():
    print(piece)
