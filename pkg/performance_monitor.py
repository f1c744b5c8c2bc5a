# -*- coding: utf-8 -*-
"""
性能监控：命令级的耗时与内存、求解内部的分阶段计时与运算计数
"""
import logging
import time
from contextlib import contextmanager
from typing import Dict

import psutil

logger = logging.getLogger('SISDMDP.PerformanceMonitor')

_MB = 1024 * 1024


class PerformanceMonitor:
    """以上下文管理器包住一次命令运行，退出时记录墙钟耗时与常驻内存（RSS）

    stats 在退出后可读：elapsed_s、rss_mb、rss_delta_mb、rss_peak_mb（采样于进入、退出与 sample() 调用时）。
    """

    def __init__(self, label: str = 'run'):
        self.label = label
        self.stats: Dict[str, float] = {}
        self._process = psutil.Process()
        self._t0 = None
        self._rss0 = 0.0
        self._peak = 0.0

    def _rss(self) -> float:
        return self._process.memory_info().rss / _MB

    def sample(self) -> float:
        """采样当前 RSS 并更新峰值"""
        rss = self._rss()
        self._peak = max(self._peak, rss)
        return rss

    def __enter__(self) -> 'PerformanceMonitor':
        self._t0 = time.perf_counter()
        self._rss0 = self._peak = self._rss()
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        rss = self.sample()
        self.stats = {
            'elapsed_s': time.perf_counter() - self._t0,
            'rss_mb': rss,
            'rss_delta_mb': rss - self._rss0,
            'rss_peak_mb': self._peak,
        }
        logger.info(f"⏱️ {self.label} | 耗时: {self.stats['elapsed_s']:.2f}s | "
                    f"内存: {rss:.1f}MB（变化 {self.stats['rss_delta_mb']:+.1f}MB，峰值 {self._peak:.1f}MB）")
        return False


class PhaseTimer:
    """分阶段计时器（单调时钟），用于区分评估与改进耗时"""

    def __init__(self):
        self.totals: Dict[str, float] = {}
        self._start = time.perf_counter()

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] = self.totals.get(name, 0.0) + (time.perf_counter() - t0)

    def get(self, name: str) -> float:
        return self.totals.get(name, 0.0)

    def elapsed(self) -> float:
        """自创建以来的总耗时"""
        return time.perf_counter() - self._start


class OpCounter:
    """算术运算计数器，用于验证线性复杂度"""

    def __init__(self):
        self.ops = 0

    def add(self, n: int):
        self.ops += int(n)

    def reset(self):
        self.ops = 0
