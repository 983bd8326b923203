"""
Kähler Toolkit - 凯勒与四元凯勒流形数值几何工具集

在单一坐标卡上计算正交Ricci曲率、全纯/四元截面曲率、Bakry-Émery张量,
数值验证修正Bochner公式与Laplace比较不等式, 模拟比较扩散过程, 并检验直径上界。
"""

__version__ = "1.0.0"
__author__ = "Kähler Toolkit Team"
__license__ = "MIT"

from .core.logger import get_logger

__all__ = ["__version__", "get_logger"]
