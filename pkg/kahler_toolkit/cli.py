"""
Kähler Toolkit CLI 入口

基于Typer构建: 每个命令把参数转换为 "section.key" 覆盖项, 与 settings.yaml 和 --config 文件
合并为 RunConfig, 交给对应插件执行, 然后打印结果并写出报告。

退出码: 0 无 FAIL, 1 有实验判定为 FAIL, 2 配置/输入错误, 3 数值错误或未预期的异常。
"""

import importlib
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer

from kahler_toolkit import __version__
from kahler_toolkit.config.config_manager import get_config
from kahler_toolkit.config.run_config import RunConfig
from kahler_toolkit.core.errors import EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERIC, KahlerToolkitError
from kahler_toolkit.core.logger import get_logger, log_audit, setup_logging
from kahler_toolkit.plugins.base import ExperimentResult, Plugin, Verdict, get_plugin
from kahler_toolkit.ui.components import (
    create_catalog_table,
    create_header_panel,
    show_experiment,
    show_saved,
)
from kahler_toolkit.ui.theme import console
from kahler_toolkit.utils.export_utils import build_report, save_report

app = typer.Typer(
    name="kahler",
    help="Kähler Toolkit - 凯勒与四元凯勒流形的曲率计算、比较定理验证与扩散模拟",
    add_completion=False,
    pretty_exceptions_show_locals=False,
)
verify_app = typer.Typer(help="验证实验 (bochner, comparison, diameter, limits, structure)", add_completion=False)
simulate_app = typer.Typer(help="扩散模拟 (rho, manifold)", add_completion=False)
plotdata_app = typer.Typer(help="导出绘图用 CSV 序列 (comparison, rho)", add_completion=False)
app.add_typer(verify_app, name="verify")
app.add_typer(simulate_app, name="simulate")
app.add_typer(plotdata_app, name="plotdata")

logger = get_logger(__name__)

PLUGIN_MODULES = {
    "curvature": "kahler_toolkit.plugins.curvature.pointwise",
    "verify_bochner": "kahler_toolkit.plugins.verify.bochner",
    "verify_comparison": "kahler_toolkit.plugins.verify.comparison",
    "verify_diameter": "kahler_toolkit.plugins.verify.diameter",
    "verify_limits": "kahler_toolkit.plugins.verify.limits",
    "verify_structure": "kahler_toolkit.plugins.verify.structure",
    "simulate_rho": "kahler_toolkit.plugins.simulate.rho",
    "simulate_manifold": "kahler_toolkit.plugins.simulate.manifold",
    "plotdata_comparison": "kahler_toolkit.plugins.plotdata.series",
    "plotdata_rho": "kahler_toolkit.plugins.plotdata.series",
}

# ==================== 共用参数 ====================

MANIFOLD = typer.Option(None, "--manifold", "-m", help="目录项名称 (如 cp2) 或 YAML 流形文件路径")
SEED = typer.Option(None, "--seed", help="随机种子")
BASE = typer.Option(None, "--base", help="基点坐标, 逗号分隔")
DIRECTION = typer.Option(None, "--dir", help="方向分量, 逗号分隔")
Z_FIELD = typer.Option(None, "--z", help="向量场 Z 的分量表达式 (按坐标顺序重复给出)")
MODEL_K = typer.Option(None, "--k", help="比较模型的 k")
MODEL_M = typer.Option(None, "--m", help="Bakry–Émery 参数 m")


def init_app(log_level: Optional[str] = None) -> None:
    """初始化日志系统"""
    config = get_config()
    setup_logging(
        log_dir=config.get("output.log_dir", "./logs"),
        log_level=(log_level or config.get("app.log_level", "INFO")).upper(),
        enable_console=True,
        enable_file=config.get("logging.enable_file", True),
        enable_audit=config.get("logging.enable_file", True),
        rotation=config.get("logging.rotation", "10 MB"),
        retention=config.get("logging.retention", "30 days"),
        compression=config.get("logging.compression", "zip"),
    )
    logger.debug("Kähler Toolkit 已初始化")


def load_plugin(name: str) -> Plugin:
    """导入插件模块 (触发注册) 并实例化"""
    try:
        importlib.import_module(PLUGIN_MODULES[name])
    except ImportError as e:
        console.print(f"[red]无法加载插件 {name}: {e}[/red]")
        raise typer.Exit(EXIT_CONFIG)
    return get_plugin(name)


def _fail(error: KahlerToolkitError) -> None:
    console.print(f"[red]错误: {error.message}[/red]")
    logger.error(f"{type(error).__name__}: {error.message}")
    raise typer.Exit(error.exit_code)


def _global_overrides(ctx: typer.Context) -> Dict[str, Any]:
    options = ctx.obj or {}
    return {
        "parallel.threads": options.get("threads"),
        "output.dir": options.get("output_dir"),
        "output.formats": options.get("formats"),
    }


def build_config(ctx: typer.Context, command: str, overrides: Dict[str, Any]) -> RunConfig:
    options = ctx.obj or {}
    try:
        return RunConfig.build(command, {**overrides, **_global_overrides(ctx)}, config_file=options.get("config"))
    except KahlerToolkitError as e:
        _fail(e)


def save_results(results: List[ExperimentResult], config: RunConfig, formats: Optional[List[str]] = None) -> List[Path]:
    """每个实验写出 JSON 报告 / CSV 序列 / Markdown 摘要"""
    saved = []
    echo = config.to_dict()
    for result in results:
        prefix = f"{Path(result.plan.manifold).stem}_{result.experiment}"
        report = result.to_report(echo)
        for fmt in formats or config.formats:
            if fmt == "csv":
                if not result.rows:
                    continue
                path = save_report(result.rows, config.output_dir, prefix, "csv", result.fieldnames)
            else:
                path = save_report(report, config.output_dir, prefix, fmt)
            if path is not None:
                saved.append(path)
    return saved


def execute(
    ctx: typer.Context,
    command: str,
    plugin_name: str,
    overrides: Dict[str, Any],
    formats: Optional[List[str]] = None,
) -> None:
    """
    运行插件并处理输出与退出码

    Args:
        command: 命令名 (写入配置回显与审计日志)
        plugin_name: 注册名
        overrides: 命令行参数, 键为 "section.key"
        formats: 强制的导出格式 (plotdata 只写 CSV)
    """
    config = build_config(ctx, command, overrides)
    plugin = load_plugin(plugin_name)
    if not plugin.initialize():
        console.print("[red]插件初始化失败[/red]")
        raise typer.Exit(EXIT_CONFIG)

    target = config.get("run.manifold") or "model"
    overall = Verdict.SKIPPED
    try:
        console.print(create_header_panel(f"kahler {command}", f"{target} | seed {config.seed}"))
        results = plugin.run(config)
        overall = Verdict.overall(r.verdict for r in results)
        for result in results:
            show_experiment(result)
        show_saved(save_results(results, config, formats))
        log_audit(command, str(target), overall.value, seed=config.seed)
    except KahlerToolkitError as e:
        log_audit(command, str(target), "ERROR", seed=config.seed, message=e.message)
        _fail(e)
    except Exception as e:  # noqa: BLE001
        logger.exception(f"未预期的错误: {e}")
        console.print(f"[red]未预期的错误: {e}[/red]")
        raise typer.Exit(EXIT_NUMERIC)
    finally:
        plugin.cleanup()

    if overall is Verdict.FAIL:
        raise typer.Exit(EXIT_FAIL)


# ==================== CLI 命令 ====================

def _version_callback(value: bool) -> None:
    if value:
        console.print(f"Kähler Toolkit v{__version__}")
        raise typer.Exit()


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="运行配置文件 (YAML)"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="报告输出目录 (缺省取 KAHLER_OUTPUT_DIR)"),
    threads: Optional[int] = typer.Option(None, "--threads", "-T", help="线程数 (不改变结果)"),
    formats: Optional[str] = typer.Option(None, "--formats", help="导出格式, 逗号分隔 (json,csv,md)"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="日志级别"),
    version: bool = typer.Option(
        False, "--version", "-v", help="显示版本号", callback=_version_callback, is_eager=True
    ),
):
    """
    Kähler Toolkit - 凯勒与四元凯勒流形的数值几何工具

    全局参数写在子命令之前, 例如: kahler --threads 4 verify comparison --manifold cp2
    """
    init_app(log_level)
    ctx.obj = {
        "config": config,
        "output_dir": str(output_dir) if output_dir else None,
        "threads": threads,
        "formats": formats,
    }


@app.command()
def curvature(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    point: Optional[str] = typer.Option(None, "--point", help="坐标点, 逗号分隔 (缺省为基点)"),
    direction: Optional[str] = DIRECTION,
    phi: Optional[str] = typer.Option(None, "--phi", help="势函数 φ 的表达式"),
    m: Optional[float] = MODEL_M,
    z: Optional[List[str]] = Z_FIELD,
):
    """
    逐点曲率 - Γ, R, Ric, H/Q, Ric⊥ 与 Bakry–Émery 修正

    示例:
        kahler curvature --manifold cp2 --point 0,0,0,0 --dir 1,0,0,0
        kahler curvature --manifold cp2 --dir 1,0,0,0 --m 6 --z "0.1*x1" --z 0 --z 0 --z 0
    """
    execute(ctx, "curvature", "curvature", {
        "run.manifold": manifold,
        "run.point": point,
        "run.direction": direction,
        "run.phi": phi,
        "run.z": z or None,
        "model.m": m,
    })


@verify_app.command("bochner")
def verify_bochner(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    samples: Optional[int] = typer.Option(None, "--samples", help="采样点数"),
    seed: Optional[int] = SEED,
    f: Optional[str] = typer.Option(None, "--f", help="测试函数: 表达式, 或 r 表示距离函数"),
    base: Optional[str] = BASE,
    coefficient: Optional[str] = typer.Option(
        None, "--quaternionic-coefficient", help="四元 Bochner 公式的系数读法 (derived/printed)"
    ),
):
    """
    修正 Bochner 公式的残差与修正 Bochner 不等式

    示例:
        kahler verify bochner --manifold cp2 --samples 50 --seed 7
        kahler verify bochner --manifold flat-c2 --f "x1^2*x3 - x2*x4"
    """
    execute(ctx, "verify bochner", "verify_bochner", {
        "run.manifold": manifold,
        "run.f": f,
        "run.base": base,
        "verify.samples": samples,
        "verify.seed": seed,
        "verify.bochner_quaternionic_coefficient": coefficient,
    })


@verify_app.command("comparison")
def verify_comparison(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    k: Optional[float] = MODEL_K,
    m: Optional[float] = MODEL_M,
    z: Optional[List[str]] = Z_FIELD,
    direction: Optional[str] = DIRECTION,
    base: Optional[str] = BASE,
    radii: Optional[int] = typer.Option(None, "--radii", help="r 网格点数"),
    directions: Optional[int] = typer.Option(None, "--directions", help="测量 k 时每点的随机方向数"),
    cases: Optional[int] = typer.Option(None, "--cases", help="Riccati 算例数"),
    variant: Optional[str] = typer.Option(None, "--variant", help="四元常数读法 (printed/derived)"),
    reading: Optional[str] = typer.Option(None, "--reading", help="假设读法 (proof/printed)"),
    seed: Optional[int] = SEED,
):
    """
    Laplace 比较定理扫描、扰动度量检查与 Riccati 比较

    示例:
        kahler verify comparison --manifold cp2 --k 1 --m 4
        kahler verify comparison --manifold hp1 --variant derived
    """
    execute(ctx, "verify comparison", "verify_comparison", {
        "run.manifold": manifold,
        "run.z": z or None,
        "run.direction": direction,
        "run.base": base,
        "model.k": k,
        "model.m": m,
        "verify.radii": radii,
        "verify.directions": directions,
        "verify.lemma_cases": cases,
        "verify.seed": seed,
        "comparison.quaternionic_variant": variant,
        "comparison.hypothesis_reading": reading,
    })


@verify_app.command("diameter")
def verify_diameter(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    flavor: Optional[str] = typer.Option(
        None, "--flavor", help="non-gradient / gradient-bounded / gradient-riccati"
    ),
    k: Optional[float] = MODEL_K,
    m: Optional[float] = MODEL_M,
    c: Optional[float] = typer.Option(None, "--C", help="声明的 C"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Riccati 参数 α (缺省 2√C)"),
    phi: Optional[str] = typer.Option(None, "--phi", help="势函数 φ 的表达式"),
    z: Optional[List[str]] = Z_FIELD,
    pairs: Optional[int] = typer.Option(None, "--pairs", help="点对数"),
    cases: Optional[int] = typer.Option(None, "--cases", help="积分引理算例数"),
    profile: Optional[str] = typer.Option(None, "--profile", help="替代剖面 (jacobi/literal)"),
    lie_factor: Optional[float] = typer.Option(None, "--lie-factor", help="Lie 导数引理右端的系数"),
    seed: Optional[int] = SEED,
):
    """
    Bonnet–Myers 型直径上界与两个积分引理

    示例:
        kahler verify diameter --manifold cp2
        kahler verify diameter --manifold cp1xcp1 --flavor non-gradient
    """
    execute(ctx, "verify diameter", "verify_diameter", {
        "run.manifold": manifold,
        "run.phi": phi,
        "run.z": z or None,
        "model.flavor": flavor,
        "model.k": k,
        "model.m": m,
        "model.C": c,
        "model.alpha": alpha,
        "verify.pairs": pairs,
        "verify.lemma_cases": cases,
        "verify.seed": seed,
        "comparison.alternative_profile": profile,
        "comparison.lie_lemma_factor": lie_factor,
    })


@verify_app.command("limits")
def verify_limits(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    m: Optional[float] = MODEL_M,
    route: Optional[str] = typer.Option(None, "--route", help="径向导数路线 (jacobi/stencil/closed-form)"),
    base: Optional[str] = BASE,
    seed: Optional[int] = SEED,
):
    """
    小 r 极限 (r·Δ⊥r, rhs·r) 与第一个共轭点

    示例:
        kahler verify limits --manifold cp2
    """
    execute(ctx, "verify limits", "verify_limits", {
        "run.manifold": manifold,
        "run.base": base,
        "model.m": m,
        "numerics.radial_route": route,
        "verify.seed": seed,
    })


@verify_app.command("structure")
def verify_structure(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    samples: Optional[int] = typer.Option(None, "--samples", help="采样点数"),
    seed: Optional[int] = SEED,
):
    """
    结构张量与曲率恒等式

    示例:
        kahler verify structure --manifold hp1 --samples 10
    """
    execute(ctx, "verify structure", "verify_structure", {
        "run.manifold": manifold,
        "verify.samples": samples,
        "verify.seed": seed,
    })


@simulate_app.command("rho")
def simulate_rho(
    ctx: typer.Context,
    k: Optional[float] = MODEL_K,
    m: Optional[float] = MODEL_M,
    n: Optional[int] = typer.Option(None, "--n", help="复/四元维数 (缺省由 m 推出)"),
    kind: Optional[str] = typer.Option(None, "--kind", help="kahler / quaternionic"),
    manifold: Optional[str] = MANIFOLD,
    rho0: Optional[float] = typer.Option(None, "--rho0", help="初值"),
    horizon: Optional[float] = typer.Option(None, "--T", help="时间区间长度"),
    dt: Optional[float] = typer.Option(None, "--dt", help="基本步长"),
    paths: Optional[int] = typer.Option(None, "--paths", help="路径数"),
    drift: Optional[str] = typer.Option(None, "--drift", help="comparison / zero / log-barrier"),
    barrier: Optional[float] = typer.Option(None, "--barrier", help="屏障 (缺省为模型屏障)"),
    variant: Optional[str] = typer.Option(None, "--variant", help="四元常数读法 (printed/derived)"),
    record_every: Optional[int] = typer.Option(None, "--record-every", help="每隔多少步记录一次"),
    check_dt: bool = typer.Option(False, "--check-dt", help="另以 dt/2 重跑并比较"),
    seed: Optional[int] = SEED,
):
    """
    一维比较扩散 ρ 的命中统计与边界分类

    示例:
        kahler simulate rho --k 1 --m 4 --rho0 0.5 --paths 10000 --seed 42
        kahler simulate rho --k 1 --m 4 --rho0 1.5607963 --paths 1000 --check-dt
    """
    execute(ctx, "simulate rho", "simulate_rho", {
        "run.manifold": manifold,
        "model.k": k,
        "model.m": m,
        "model.n": n,
        "model.kind": kind,
        "stochastic.rho0": rho0,
        "stochastic.T": horizon,
        "stochastic.dt": dt,
        "stochastic.paths": paths,
        "stochastic.drift": drift,
        "stochastic.barrier": barrier,
        "stochastic.record_every": record_every,
        "stochastic.check_dt": check_dt or None,
        "comparison.quaternionic_variant": variant,
        "verify.seed": seed,
    })


@simulate_app.command("manifold")
def simulate_manifold(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    start: Optional[str] = typer.Option(None, "--q", help="起点坐标, 逗号分隔"),
    base: Optional[str] = BASE,
    z: Optional[List[str]] = Z_FIELD,
    m: Optional[float] = MODEL_M,
    horizon: Optional[float] = typer.Option(None, "--T", help="时间区间长度"),
    dt: Optional[float] = typer.Option(None, "--dt", help="步长"),
    paths: Optional[int] = typer.Option(None, "--paths", help="路径数"),
    decimation: Optional[int] = typer.Option(None, "--decimation", help="径向距离的记录间隔 (步)"),
    seed: Optional[int] = SEED,
):
    """
    坐标卡中生成元 Δ + Z 的扩散与径向过程 d_p(X_t)

    示例:
        kahler simulate manifold --manifold cp2 --paths 1000 --T 5
        kahler simulate manifold --manifold flat-r2 --q 0.1,0 --T 1 --paths 10000
    """
    execute(ctx, "simulate manifold", "simulate_manifold", {
        "run.manifold": manifold,
        "run.point": start,
        "run.base": base,
        "run.z": z or None,
        "model.m": m,
        "stochastic.manifold_T": horizon,
        "stochastic.manifold_dt": dt,
        "stochastic.manifold_paths": paths,
        "stochastic.decimation": decimation,
        "verify.seed": seed,
    })


@app.command()
def catalog(
    ctx: typer.Context,
    validate: bool = typer.Option(False, "--validate", help="对每个目录项运行验证"),
    samples: int = typer.Option(20, "--samples", help="验证采样点数"),
    seed: int = typer.Option(0, "--seed", help="验证种子"),
):
    """
    列出流形目录

    示例:
        kahler catalog
        kahler catalog --validate --samples 10
    """
    from kahler_toolkit.geometry.catalog import (
        catalog_names,
        describe_entry,
        get_manifold,
        validate_catalog_entry,
    )

    config = build_config(ctx, "catalog", {"verify.samples": samples, "verify.seed": seed})
    entries = []
    failed = []
    try:
        for name in catalog_names():
            spec = get_manifold(name)
            entry = describe_entry(spec)
            if validate:
                outcome = validate_catalog_entry(spec, samples=samples, seed=seed)
                entry["status"] = outcome["status"]
                entry["checks"] = outcome["checks"]
                if outcome["status"] == "failed":
                    failed.append(name)
            entries.append(entry)
    except KahlerToolkitError as e:
        _fail(e)

    console.print(create_catalog_table(entries))
    report = build_report(
        experiment="catalog",
        plan={"validate": validate, "samples": samples, "seed": seed},
        measured={"entries": entries},
        aggregates={"entries": len(entries), "failed": failed},
        verdict=Verdict.from_flag(not failed).value if validate else Verdict.SKIPPED.value,
        config=config.to_dict(),
    )
    path = save_report(report, config.output_dir, "catalog", "json")
    if path is not None:
        show_saved([path])
    log_audit("catalog", "catalog", report["verdict"], seed=seed if validate else None)
    if failed:
        raise typer.Exit(EXIT_FAIL)


@plotdata_app.command("comparison")
def plotdata_comparison(
    ctx: typer.Context,
    manifold: Optional[str] = MANIFOLD,
    k: Optional[float] = MODEL_K,
    m: Optional[float] = MODEL_M,
    z: Optional[List[str]] = Z_FIELD,
    direction: Optional[str] = DIRECTION,
    radii: Optional[int] = typer.Option(None, "--radii", help="r 网格点数"),
    seed: Optional[int] = SEED,
):
    """
    r, ℒr, 比较右端与余量的 CSV 序列

    示例:
        kahler plotdata comparison --manifold cp2
    """
    execute(ctx, "plotdata comparison", "plotdata_comparison", {
        "run.manifold": manifold,
        "run.z": z or None,
        "run.direction": direction,
        "model.k": k,
        "model.m": m,
        "verify.radii": radii,
        "verify.seed": seed,
    }, formats=["csv"])


@plotdata_app.command("rho")
def plotdata_rho(
    ctx: typer.Context,
    k: Optional[float] = MODEL_K,
    m: Optional[float] = MODEL_M,
    rho0: Optional[float] = typer.Option(None, "--rho0", help="初值"),
    horizon: Optional[float] = typer.Option(None, "--T", help="时间区间长度"),
    dt: Optional[float] = typer.Option(None, "--dt", help="基本步长"),
    paths: Optional[int] = typer.Option(None, "--paths", help="路径数"),
    record_every: Optional[int] = typer.Option(None, "--record-every", help="每隔多少步记录一次"),
    seed: Optional[int] = SEED,
):
    """
    ρ 过程分位数扇形的 CSV 序列

    示例:
        kahler plotdata rho --k 1 --m 4 --paths 2000
    """
    execute(ctx, "plotdata rho", "plotdata_rho", {
        "model.k": k,
        "model.m": m,
        "stochastic.rho0": rho0,
        "stochastic.T": horizon,
        "stochastic.dt": dt,
        "stochastic.paths": paths,
        "stochastic.record_every": record_every,
        "verify.seed": seed,
    }, formats=["csv"])


if __name__ == "__main__":
    app()
