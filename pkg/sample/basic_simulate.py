from epimon.engine import simulate
from epimon.model import load_scenario
from epimon.spectral import doubling_time
from epimon.spectral import perron_eigenvalue
from epimon.tools.fixtures import closed_form_scenario

# 闭式模型: ψ≡1, K≡0, x_E*=3, x_I*=7
scenario = load_scenario(closed_form_scenario(mu=2 / 7, horizon=60))

# 模拟并取每日记录
trajectory = simulate(scenario.params, scenario.init, scenario.horizon, scenario.dt)

# 各阶段的增长率
for start, mu in scenario.params.mu_schedule:
    lam = perron_eigenvalue(scenario.params, mu)
    print(start, mu, lam, doubling_time(lam))

print(trajectory.to_frame().tail())
