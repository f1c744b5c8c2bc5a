# -*- coding: utf-8 -*-
"""
并行任务执行模块 - 基准测试的网格点 × 种子任务互相独立
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from typing import Callable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

from config import PERFORMANCE_CONFIG
from utils import resolve_workers

logger = logging.getLogger('SISDMDP.ParallelRunner')

T = TypeVar('T')
R = TypeVar('R')


class ParallelRunner:
    """进程池执行器：结果按任务顺序返回，失败时回退到串行"""

    def __init__(self, max_workers: Optional[int] = None, progress: bool = True):
        self.max_workers = resolve_workers(max_workers)
        self.use_parallel = PERFORMANCE_CONFIG['use_parallel']
        self.serial_threshold = PERFORMANCE_CONFIG['serial_threshold']
        self.progress = progress

    def run(self, func: Callable[[T], R], tasks: Sequence[T], desc: str = '任务') -> List[R]:
        """func 必须是模块级函数（可被 pickle）"""
        tasks = list(tasks)
        if not tasks:
            return []
        if not self.use_parallel or self.max_workers <= 1 or len(tasks) <= self.serial_threshold:
            return self._serial_process(func, tasks, desc)
        return self._parallel_process(func, tasks, desc)

    def _serial_process(self, func, tasks, desc) -> List[R]:
        logger.info(f"使用串行处理模式 | 任务数: {len(tasks)}")
        return [func(task) for task in tqdm(tasks, desc=desc, disable=not self.progress)]

    def _parallel_process(self, func, tasks, desc) -> List[R]:
        workers = min(self.max_workers, len(tasks))
        logger.info(f"使用并行处理模式 | 工作进程数: {workers} | 任务数: {len(tasks)}")
        try:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                return list(tqdm(executor.map(func, tasks), total=len(tasks), desc=desc,
                                 disable=not self.progress))
        except (OSError, BrokenProcessPool) as e:
            logger.warning(f"⚠️ 并行处理失败，回退到串行处理: {e}")
            return self._serial_process(func, tasks, desc)
