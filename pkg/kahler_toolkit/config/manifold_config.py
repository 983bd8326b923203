"""
流形文件

--manifold 既可以是目录名, 也可以是YAML文件路径。文件格式:

    name: warped-c1
    kind: kahler            # kahler | quaternionic | riemannian
    dimension: 2
    metric:                 # 上三角分量, 键 "i,j" (1起始), 缺省分量为 0
      "1,1": "1 + 0.1*x1^2"
      "2,2": "1 + 0.1*x1^2"
    structures:             # 凯勒 [J], 四元 [I, J, K]; 每个为 d×d 的DSL字符串矩阵
      - [["0", "-1"], ["1", "0"]]
    injectivity_radius: 1.0
    chart_domain: {ball: 3.0}   # 或 {box: [[lo, hi], ...]}, 缺省为整个 R^d
    base_point: [0, 0]

或者只写 `catalog: cp2` 引用目录项。
"""

from pathlib import Path
from typing import Any, Dict, Tuple

from kahler_toolkit.config.config_manager import load_yaml_mapping
from kahler_toolkit.core.errors import ConfigError, KahlerToolkitError
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.catalog import get_manifold, is_catalog_name
from kahler_toolkit.geometry.manifold import (
    ChartDomain,
    ManifoldKind,
    ManifoldSpec,
    matrix_field_from_texts,
    symmetric_metric_from_texts,
)

logger = get_logger(__name__)

MANIFOLD_KEYS = frozenset(
    {"name", "kind", "dimension", "metric", "structures", "injectivity_radius", "chart_domain",
     "base_point", "catalog", "description"}
)


def _metric_entries(raw: Any, dimension: int) -> Dict[Tuple[int, int], str]:
    if isinstance(raw, list):
        # 按行给出的上三角: 第 i 行从对角元开始
        entries = {}
        for i, row in enumerate(raw, start=1):
            for offset, text in enumerate(row):
                entries[(i, i + offset)] = str(text)
        return entries
    if not isinstance(raw, dict):
        raise ConfigError("metric 必须是 {\"i,j\": 表达式} 映射或上三角行列表")
    entries = {}
    for key, text in raw.items():
        try:
            i, j = (int(p) for p in str(key).replace(" ", "").split(","))
        except ValueError:
            raise ConfigError(f"metric 键必须形如 \"i,j\": {key!r}") from None
        entries[(i, j)] = str(text)
    if not entries:
        raise ConfigError("metric 不能为空")
    return entries


def _chart_domain(raw: Any) -> ChartDomain:
    if raw is None:
        return ChartDomain()
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ConfigError("chart_domain 必须是 {ball: R} 或 {box: [[lo, hi], ...]}")
    kind, value = next(iter(raw.items()))
    if kind == "ball":
        return ChartDomain(kind="ball", radius=float(value))
    if kind == "box":
        bounds = tuple((float(lo), float(hi)) for lo, hi in value)
        return ChartDomain(kind="box", bounds=bounds)
    raise ConfigError(f"未知的 chart_domain 类型: {kind}")


def manifold_from_mapping(data: Dict[str, Any], source: str = "file") -> ManifoldSpec:
    """
    由映射构造 ManifoldSpec

    Raises:
        ConfigError: 未知键、缺少字段、DSL 解析失败等
    """
    unknown = sorted(set(data) - MANIFOLD_KEYS)
    if unknown:
        raise ConfigError(f"流形文件含未知键: {', '.join(unknown)}")
    if "catalog" in data:
        return get_manifold(str(data["catalog"]))

    for required in ("kind", "dimension", "metric"):
        if required not in data:
            raise ConfigError(f"流形文件缺少字段: {required}")
    try:
        kind = ManifoldKind(str(data["kind"]))
    except ValueError:
        raise ConfigError(f"未知的流形类型: {data['kind']}") from None
    dimension = int(data["dimension"])

    metric_fn = symmetric_metric_from_texts(_metric_entries(data["metric"], dimension), dimension)
    structures = tuple(matrix_field_from_texts(rows, dimension) for rows in data.get("structures") or [])
    metadata: Dict[str, Any] = {"needs_validation": True}
    if data.get("base_point") is not None:
        base = [float(v) for v in data["base_point"]]
        if len(base) != dimension:
            raise ConfigError(f"base_point 维数必须为 {dimension}")
        metadata["base_point"] = base

    hint = data.get("injectivity_radius")
    spec = ManifoldSpec(
        name=str(data.get("name", source)),
        dimension=dimension,
        kind=kind,
        metric_fn=metric_fn,
        structure_fns=structures,
        injectivity_radius_hint=float(hint) if hint is not None else None,
        chart_domain=_chart_domain(data.get("chart_domain")),
        description=str(data.get("description", "")),
        source=source,
        metadata=metadata,
    )
    logger.info(f"已从 {source} 加载流形 {spec.name} ({kind.value}, d={dimension})")
    return spec


def load_manifold(selection: str) -> ManifoldSpec:
    """
    解析 --manifold: 目录名优先, 否则按YAML文件路径读取

    Raises:
        ConfigError: 既不是目录名也不是可读的流形文件
    """
    if is_catalog_name(selection):
        return get_manifold(selection)
    path = Path(selection)
    if path.suffix.lower() not in (".yaml", ".yml") or not path.exists():
        return get_manifold(selection)  # 抛出带可选列表的 ConfigError
    data = load_yaml_mapping(path, "流形文件")
    try:
        return manifold_from_mapping(data, source=str(path))
    except ConfigError:
        raise
    except KahlerToolkitError as e:
        raise ConfigError(f"流形文件 {path} 无效: {e.message}") from e


__all__ = ["load_manifold", "manifold_from_mapping", "MANIFOLD_KEYS"]
