"""
曲率插件模块

逐点曲率查询。
"""
