"""
插件共用的输入解析

从 RunConfig 取流形、点、方向、场与比较模型; 向量维数不符等问题在计算开始前报出。
"""

from typing import Optional

import numpy as np

from kahler_toolkit.config.manifold_config import load_manifold
from kahler_toolkit.core.errors import ConfigError, GeometryInputError
from kahler_toolkit.geometry.catalog import base_point, radial_point
from kahler_toolkit.geometry.comparison import ComparisonModel, ModelKind
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, ScalarField, VectorField

PURE_JET_TOL = 1e-8


def manifold_from_config(config, default: Optional[str] = None) -> ManifoldSpec:
    """
    --manifold 指定的流形

    Raises:
        ConfigError: 未给出且没有缺省值, 或无法解析
    """
    selection = config.get("run.manifold") or default
    if not selection:
        raise ConfigError(f"命令 {config.command} 需要 --manifold")
    return load_manifold(selection)


def config_vector(spec: ManifoldSpec, config, key: str) -> Optional[np.ndarray]:
    value = config.get(f"run.{key}")
    if value is None:
        return None
    vec = np.asarray(value, dtype=float)
    if vec.shape != (spec.dimension,):
        raise GeometryInputError(f"{key} 需要 {spec.dimension} 个分量, 实际 {vec.size}")
    return vec


def base_from_config(spec: ManifoldSpec, config) -> np.ndarray:
    """run.base, 缺省为目录项基点"""
    base = config_vector(spec, config, "base")
    return base_point(spec) if base is None else base


def drift_field(spec: ManifoldSpec, config) -> VectorField:
    texts = config.get("run.z")
    if not texts:
        return VectorField.zero()
    return VectorField.from_texts(texts, spec.dimension)


def potential(spec: ManifoldSpec, config) -> Optional[ScalarField]:
    text = config.get("run.phi")
    if not text:
        return None
    return ScalarField.from_text(text, spec.dimension, role="phi")


def model_kind(spec: Optional[ManifoldSpec], config) -> ModelKind:
    kind = config.get("model.kind")
    if kind is not None:
        return ModelKind(kind)
    if spec is None:
        return ModelKind.KAHLER
    if spec.kind is ManifoldKind.RIEMANNIAN:
        raise GeometryInputError(f"{spec.name} 是黎曼流形, 比较模型需要凯勒或四元凯勒流形")
    return ModelKind(spec.kind.value)


def model_from_config(
    config,
    spec: Optional[ManifoldSpec] = None,
    k: Optional[float] = None,
    variant: Optional[str] = None,
) -> ComparisonModel:
    """
    比较模型: 命令行/配置文件给出的 k, m, C, n, flavor, alpha; 缺失的 n 与类型取自流形

    k 的优先级: 参数 k > model.k > 1.0
    """
    n = config.get("model.n")
    if n is None:
        if spec is None:
            raise ConfigError("比较模型需要 --n 或 --manifold")
        n = spec.n
    return ComparisonModel(
        k=float(k if k is not None else config.get("model.k", 1.0)),
        n=int(n),
        m=config.get("model.m"),
        C=float(config.get("model.C", 0.0)),
        kind=model_kind(spec, config),
        flavor=config.get("model.flavor"),
        variant=variant or config.get("comparison.quaternionic_variant", "printed"),
        alpha=config.get("model.alpha"),
    )


def radial_sample_points(
    spec: ManifoldSpec, radii, count: int, rng: np.random.Generator, base=None
) -> np.ndarray:
    """
    在每个半径上取 count 个随机方向的径向点, 形状 (len(radii)·count, d)

    有 run.base 时用指数映射, 否则用目录项的闭式径向点
    """
    from kahler_toolkit.geometry.geodesics import exp_map

    out = []
    for r in radii:
        for _ in range(count):
            u = rng.standard_normal(spec.dimension)
            if base is None:
                out.append(radial_point(spec, u, float(r)))
            else:
                g = spec.metric(base)
                out.append(exp_map(spec, base, float(r) * u / np.sqrt(u @ g @ u)))
    return np.array(out)


def pipeline_tolerance(config) -> float:
    return float(config.get("numerics.pipeline_tol", 1e-4))


def jet_tolerance(config) -> float:
    return float(config.get("numerics.jet_tol", PURE_JET_TOL))


__all__ = [
    "manifold_from_config",
    "config_vector",
    "base_from_config",
    "drift_field",
    "potential",
    "model_kind",
    "model_from_config",
    "radial_sample_points",
    "pipeline_tolerance",
    "jet_tolerance",
]
