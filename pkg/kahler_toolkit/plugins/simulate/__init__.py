"""
模拟插件模块

比较过程 ρ 与流形上的扩散。
"""
