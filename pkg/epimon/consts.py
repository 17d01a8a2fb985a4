# 日期
EPOCH = '2020-01-01'  # 第 0 天对应的日历日期

# 网格
GRID_H = 0.05  # 年龄网格步长(天)
GRID_DT = 0.05  # 时间步长(天), 默认取 CFL 等号

# 特征方程求根
ROOT_TOL = 1e-10  # |μG^λ - 1| 容差
ROOT_BRACKET = (-5.0, 5.0)  # 初始区间(1/天)
ROOT_MAX_EXPAND = 12  # 区间倍增次数上限

# 分段拟合
NM_MAXITER = 2000  # Nelder-Mead 迭代预算
NM_XATOL = 1e-8  # 单纯形直径阈值
NM_FATOL = 1e-12
NM_RESTARTS = 3
LOSS_TIE_TOL = 1e-12  # 损失相等判定

# 预警
THETA_WARN = 0.25
THETA_ALARM = 0.75
WINDOW_DAYS = 10
DOUBLING_D = 14.0  # 倍增时间阈值(天)
EPSILON = 0.05
MODEL = 'l1'

# 预警级别, 从低到高
LEVELS = ('none', 'warning', 'alarm', 'confirmed')

# 退出码
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# 校验容差
TROPICAL_TOL = 1e-6

CONFIG = {
    'EPOCH': EPOCH,
    'GRID': {'H': GRID_H, 'DT': GRID_DT},
    'SPECTRAL': {'TOL': ROOT_TOL, 'BRACKET': list(ROOT_BRACKET), 'MAX_EXPAND': ROOT_MAX_EXPAND},
    'SEGFIT': {'MAXITER': NM_MAXITER, 'XATOL': NM_XATOL, 'FATOL': NM_FATOL, 'RESTARTS': NM_RESTARTS},
    'ALARM': {
        'THETA_WARN': THETA_WARN,
        'THETA_ALARM': THETA_ALARM,
        'WINDOW': WINDOW_DAYS,
        'D': DOUBLING_D,
        'EPSILON': EPSILON,
        'MODEL': MODEL,
    },
}
