# -*- coding: utf-8 -*-
"""
迭代停止准则：span 半范数、ℓ∞ 范数、停滞窗口与时间预算
"""
import time
from collections import deque

import numpy as np

from config import STOPPING_CONFIG

STOP_REASONS = ('policy_fixed', 'span', 'linf', 'max_iter', 'stagnation', 'budget')
CONVERGED_REASONS = ('policy_fixed', 'span', 'linf', 'stagnation')


def span(v: np.ndarray) -> float:
    """span 半范数 max(v) - min(v)"""
    if v.size == 0:
        return 0.0
    return float(np.max(v) - np.min(v))


def linf(v: np.ndarray) -> float:
    """ℓ∞ 范数"""
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v)))


class StagnationMonitor:
    """监视迄今最小的度量值：最近 window 次迭代内累计改进小于 threshold 即判定停滞

    跟踪最小值而非最新值，振荡的度量（周期链上的 span）同样会触发。
    window 为 0 时禁用。
    """

    def __init__(self, window: int = None, threshold: float = None):
        self.window = STOPPING_CONFIG['stagnation_window'] if window is None else window
        self.threshold = STOPPING_CONFIG['stagnation_threshold'] if threshold is None else threshold
        self.best = np.inf
        self._history = deque(maxlen=(self.window or 0) + 1)

    def update(self, value: float) -> bool:
        """记录本次度量，返回是否停滞"""
        self.best = min(self.best, float(value))
        if not self.window:
            return False
        self._history.append(self.best)
        if len(self._history) <= self.window:
            return False
        return self._history[0] - self._history[-1] < self.threshold


class Deadline:
    """单调时钟时间预算；budget_s 为 None 表示不限时"""

    def __init__(self, budget_s: float = None):
        self.budget_s = budget_s
        self.start = time.perf_counter()

    def expired(self) -> bool:
        return self.budget_s is not None and time.perf_counter() - self.start >= self.budget_s
