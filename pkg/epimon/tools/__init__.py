# 内置合成数据与性质校验
