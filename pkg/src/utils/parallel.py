"""
并行执行工具
按输入顺序返回结果，worker 数量不影响输出
"""

import logging
import multiprocessing
from typing import Callable, Iterable, List, Optional, Sequence, Any

logger = logging.getLogger(__name__)


def _context():
    methods = multiprocessing.get_all_start_methods()
    return multiprocessing.get_context("fork" if "fork" in methods else "spawn")


def parallel_map(func: Callable[[Any], Any], items: Sequence[Any], workers: int = 1,
                 initializer: Optional[Callable[..., None]] = None, initargs: Iterable = (),
                 chunksize: Optional[int] = None) -> List[Any]:
    """有序并行映射

    Args:
        func: 模块级函数（需可被 pickle）
        items: 输入序列
        workers: 进程数，<=1 时在当前进程内顺序执行
        initializer: 每个 worker 启动时调用，用于装载只读共享数据
        initargs: initializer 的参数
        chunksize: 每批任务数量
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [func(item) for item in items]

    workers = min(workers, len(items))
    if chunksize is None:
        chunksize = max(1, len(items) // (workers * 4))
    logger.debug(f"启动 {workers} 个进程处理 {len(items)} 项任务")
    with _context().Pool(processes=workers, initializer=initializer, initargs=tuple(initargs)) as pool:
        return pool.map(func, items, chunksize=chunksize)
