"""
绘图数据插件模块

只导出 CSV 序列, 不在进程内绘图。
"""
