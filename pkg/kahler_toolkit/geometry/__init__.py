"""
几何计算模块

metric_dsl / jet:   度量表达式与截断Taylor喷射
manifold / catalog: 坐标卡流形与内置目录
curvature / calculus / bochner: 点态曲率、微分算子、Bochner 各项
geodesics:          测地线、平行移动、打靶距离、径向导数、指标形式
comparison:         比较函数、直径上界、Riccati 界、积分引理
stochastic:         比较扩散与流形扩散
"""

from .catalog import catalog_names, get_manifold
from .manifold import ManifoldKind, ManifoldSpec, ScalarField, VectorField

__all__ = [
    "catalog_names",
    "get_manifold",
    "ManifoldKind",
    "ManifoldSpec",
    "ScalarField",
    "VectorField",
]
