"""
确定性并行映射

结果按输入序号排列, 与线程数和完成顺序无关。
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, TypeVar

from kahler_toolkit.core.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int]) -> int:
    """None 或 0 表示单线程"""
    if not threads or threads < 1:
        return 1
    return int(threads)


def deterministic_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: Optional[int] = None,
) -> List[R]:
    """
    并行执行 fn(item), 按 items 的顺序返回结果

    多个任务失败时, 抛出序号最小的那个异常, 保证报错也与调度无关。

    Args:
        fn: 工作函数 (不得依赖共享的可变状态)
        items: 工作项
        threads: 线程数
    """
    items = list(items)
    workers = resolve_threads(threads)
    results: List[Optional[R]] = [None] * len(items)

    if workers == 1 or len(items) <= 1:
        for index, item in enumerate(items):
            results[index] = fn(item)
        return results  # type: ignore[return-value]

    errors = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): index for index, item in enumerate(items)}
        for future in as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except Exception as e:
                logger.debug(f"工作项 {index} 失败: {e}")
                errors[index] = e

    if errors:
        raise errors[min(errors)]
    return results  # type: ignore[return-value]


__all__ = ["deterministic_map", "resolve_threads"]
