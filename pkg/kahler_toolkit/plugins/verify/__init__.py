"""
验证插件模块

Bochner 公式、Laplace 比较、直径、小 r 极限与结构检查实验。
"""
