"""
运行配置

一次命令的有效配置 = 内置默认 ← settings.yaml ← --config 文件 ← 命令行参数 (参数优先)。
所有键在计算开始前校验, 未知键与非法取值一律报 ConfigError。
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from kahler_toolkit.config.config_manager import ConfigManager, deep_merge, get_config, load_yaml_mapping
from kahler_toolkit.core.errors import ConfigError
from kahler_toolkit.core.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class Option:
    """单个配置项: 类型、默认值、可选值与下限"""
    kind: str
    default: Any = None
    choices: Tuple[str, ...] = ()
    minimum: Optional[float] = None
    exclusive: bool = False
    nullable: bool = False


FLAVOR_ALIASES = {
    "non-gradient": "non_gradient_mZ",
    "non_gradient": "non_gradient_mZ",
    "non_gradient_mz": "non_gradient_mZ",
    "gradient-bounded": "gradient_bounded_phi",
    "gradient-riccati": "gradient_riccati",
}

SCHEMA: Dict[str, Dict[str, Option]] = {
    "run": {
        "manifold": Option("str", nullable=True),
        "point": Option("vector", nullable=True),
        "direction": Option("vector", nullable=True),
        "base": Option("vector", nullable=True),
        "f": Option("str", nullable=True),
        "phi": Option("str", nullable=True),
        "z": Option("strings", nullable=True),
    },
    "model": {
        "k": Option("float", minimum=0.0, exclusive=True, nullable=True),
        "m": Option("float", minimum=1.0, nullable=True),
        "C": Option("float", minimum=0.0, nullable=True),
        "n": Option("int", minimum=1, nullable=True),
        "kind": Option("str", choices=("kahler", "quaternionic"), nullable=True),
        "flavor": Option(
            "str",
            default="non_gradient_mZ",
            choices=("gradient_bounded_phi", "gradient_riccati", "non_gradient_mZ"),
        ),
        "alpha": Option("float", minimum=0.0, nullable=True),
    },
    "numerics": {
        "unit_tol": Option("float", minimum=0.0, exclusive=True),
        "jet_tol": Option("float", minimum=0.0, exclusive=True),
        "pipeline_tol": Option("float", minimum=0.0, exclusive=True),
        "be_denominator": Option("str", choices=("real-dim", "printed")),
        "shooting_tol": Option("float", minimum=0.0, exclusive=True),
        "stencil_step": Option("float", minimum=0.0, exclusive=True),
        "radial_route": Option("str", choices=("jacobi", "stencil", "closed-form")),
    },
    "verify": {
        "samples": Option("int", minimum=1),
        "seed": Option("int", minimum=0),
        "directions": Option("int", minimum=1),
        "pairs": Option("int", minimum=2),
        "radii": Option("int", minimum=2),
        "lemma_cases": Option("int", minimum=1),
        "bochner_quaternionic_coefficient": Option("str", choices=("derived", "printed")),
    },
    "comparison": {
        "hypothesis_reading": Option("str", choices=("proof", "printed")),
        "quaternionic_variant": Option("str", choices=("printed", "derived")),
        "alternative_profile": Option("str", choices=("jacobi", "literal")),
        "lie_lemma_factor": Option("float", minimum=0.0, exclusive=True),
    },
    "stochastic": {
        "rho0": Option("float", minimum=0.0, exclusive=True),
        "T": Option("float", minimum=0.0, exclusive=True),
        "dt": Option("float", minimum=0.0, exclusive=True),
        "paths": Option("int", minimum=1),
        "floor": Option("float", minimum=0.0, exclusive=True),
        "drift": Option("str", choices=("comparison", "zero", "log-barrier")),
        "block_size": Option("int", minimum=1),
        "record_every": Option("int", minimum=0),
        "check_dt": Option("bool"),
        "manifold_T": Option("float", minimum=0.0, exclusive=True),
        "manifold_dt": Option("float", minimum=0.0, exclusive=True),
        "manifold_paths": Option("int", minimum=1),
        "decimation": Option("int", minimum=1),
        "barrier": Option("float", minimum=0.0, exclusive=True, nullable=True),
    },
    "parallel": {
        "threads": Option("int", minimum=1),
    },
    "output": {
        "dir": Option("str", nullable=True),
        "formats": Option("strings", choices=("json", "csv", "md")),
    },
}

# settings.yaml 中为运行配置提供默认值的配置节
SETTINGS_SECTIONS = ("numerics", "verify", "comparison", "stochastic", "parallel")


def _coerce_scalar(kind: str, value: Any, name: str) -> Any:
    try:
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind == "bool":
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered in ("true", "yes", "1", "on"):
                    return True
                if lowered in ("false", "no", "0", "off"):
                    return False
                raise ValueError
            return bool(value)
        if kind == "str":
            return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"配置项 {name} 需要 {kind} 类型, 实际 {value!r}") from None
    raise ConfigError(f"配置项 {name} 的类型 {kind} 未知")


def parse_vector(value: Any, name: str = "vector") -> List[float]:
    """'1,0,0,0' 或序列 → 浮点列表"""
    if isinstance(value, str):
        parts = [p for p in value.replace(";", ",").split(",") if p.strip()]
    elif isinstance(value, Sequence):
        parts = list(value)
    else:
        raise ConfigError(f"配置项 {name} 需要逗号分隔的数值列表, 实际 {value!r}")
    if not parts:
        raise ConfigError(f"配置项 {name} 不能为空")
    return [_coerce_scalar("float", p, name) for p in parts]


def coerce_value(option: Option, value: Any, name: str) -> Any:
    """
    按配置项规则转换并校验

    Raises:
        ConfigError: 类型不符、不在可选值中或低于下限
    """
    if value is None:
        if option.nullable:
            return None
        raise ConfigError(f"配置项 {name} 不能为空")

    if option.kind == "vector":
        return parse_vector(value, name)
    if option.kind == "strings":
        items = value.split(",") if isinstance(value, str) else list(value)
        result = [str(v).strip() for v in items if str(v).strip()]
        if option.choices:
            bad = [v for v in result if v not in option.choices]
            if bad:
                raise ConfigError(f"配置项 {name} 取值 {bad} 不在 {list(option.choices)} 中")
        return result

    result = _coerce_scalar(option.kind, value, name)
    if name == "model.flavor":
        result = FLAVOR_ALIASES.get(result.lower(), result)
    if option.choices and result not in option.choices:
        raise ConfigError(f"配置项 {name} 取值 {result!r} 不在 {list(option.choices)} 中")
    if option.minimum is not None:
        too_small = result <= option.minimum if option.exclusive else result < option.minimum
        if too_small:
            relation = ">" if option.exclusive else "≥"
            raise ConfigError(f"配置项 {name} 必须 {relation} {option.minimum}, 实际 {result}")
    return result


def validate_mapping(data: Mapping[str, Any], origin: str) -> Dict[str, Dict[str, Any]]:
    """
    校验嵌套映射 {section: {key: value}}

    Raises:
        ConfigError: 未知配置节或未知键
    """
    out: Dict[str, Dict[str, Any]] = {}
    for section, values in (data or {}).items():
        if section not in SCHEMA:
            raise ConfigError(f"{origin}: 未知配置节 '{section}'", key=str(section))
        if not isinstance(values, Mapping):
            raise ConfigError(f"{origin}: 配置节 '{section}' 必须是映射")
        checked = {}
        for key, value in values.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"{origin}: 未知配置键 '{section}.{key}'", key=f"{section}.{key}")
            checked[key] = coerce_value(SCHEMA[section][key], value, f"{section}.{key}")
        out[section] = checked
    return out


def split_dotted(overrides: Mapping[str, Any]) -> Dict[str, Dict[str, Any]]:
    """{'model.k': 1} → {'model': {'k': 1}}, 值为 None 的参数视为未给出"""
    nested: Dict[str, Dict[str, Any]] = {}
    for dotted, value in overrides.items():
        if value is None:
            continue
        if "." not in dotted:
            raise ConfigError(f"参数键必须形如 section.key: {dotted}")
        section, key = dotted.split(".", 1)
        nested.setdefault(section, {})[key] = value
    return nested


def _defaults() -> Dict[str, Dict[str, Any]]:
    return {section: {k: opt.default for k, opt in options.items()} for section, options in SCHEMA.items()}


@dataclass
class RunConfig:
    """
    已校验的有效配置

    Attributes:
        command: 命令名 (如 "verify comparison")
        values: {section: {key: value}}
        sources: 参与合并的来源, 按优先级从低到高
    """
    command: str
    values: Dict[str, Dict[str, Any]]
    sources: List[str] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        command: str,
        overrides: Optional[Mapping[str, Any]] = None,
        config_file: Optional[Path] = None,
        settings: Optional[ConfigManager] = None,
    ) -> "RunConfig":
        """
        合并并校验

        Args:
            command: 命令名
            overrides: 命令行参数, 键为 "section.key"
            config_file: --config 指定的YAML文件
            settings: 配置管理器 (缺省为全局实例)
        """
        settings = settings or get_config()
        layers = [("settings.yaml", {s: settings.section(s) for s in SETTINGS_SECTIONS})]
        if config_file is not None:
            layers.append((str(config_file), load_yaml_mapping(Path(config_file), "运行配置文件")))
        if overrides:
            layers.append(("flags", split_dotted(overrides)))

        merged = _defaults()
        for origin, layer in layers:
            merged = deep_merge(merged, validate_mapping(layer, origin))
        sources = ["defaults"] + [origin for origin, _ in layers]

        output_dir = merged["output"].get("dir")
        if output_dir is None:
            merged["output"]["dir"] = str(settings.output_dir())
        if not merged["output"].get("formats"):
            merged["output"]["formats"] = list(settings.get("output.formats", ["json", "csv"]))

        config = cls(command=command, values=merged, sources=sources)
        logger.debug(f"有效配置已生成: {command} | 来源 {' ← '.join(sources)}")
        return config

    def get(self, key: str, default: Any = None) -> Any:
        section, _, name = key.partition(".")
        value = self.values.get(section, {}).get(name)
        return default if value is None else value

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.values.get(name, {}))

    @property
    def seed(self) -> int:
        return int(self.get("verify.seed", 0))

    @property
    def threads(self) -> int:
        return int(self.get("parallel.threads", 1))

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output.dir", "./reports"))

    @property
    def formats(self) -> List[str]:
        return list(self.get("output.formats", ["json"]))

    def to_dict(self) -> Dict[str, Any]:
        """配置回显 (线程数不影响结果, 不参与内容哈希)"""
        echo = {s: dict(v) for s, v in self.values.items() if s not in ("parallel", "output")}
        return {"command": self.command, **echo}


__all__ = [
    "Option",
    "SCHEMA",
    "RunConfig",
    "coerce_value",
    "parse_vector",
    "split_dotted",
    "validate_mapping",
]
