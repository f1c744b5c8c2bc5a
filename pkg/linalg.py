# -*- coding: utf-8 -*-
"""
稠密线性方程组求解（Gauss-Jordan 消元，部分主元）
"""
import logging

import numpy as np

from config import SOLVER_CONFIG
from errors import DimensionError, SingularSystemError

logger = logging.getLogger('SISDMDP.Linalg')


def gauss_jordan_solve(A: np.ndarray, b: np.ndarray, rel_tol: float = None) -> np.ndarray:
    """求解 A x = b；主元绝对值小于 rel_tol × 初始最大行范数时判为奇异"""
    rel_tol = SOLVER_CONFIG['pivot_rel_tol'] if rel_tol is None else rel_tol
    a = np.array(A, dtype=float, copy=True)
    x = np.array(b, dtype=float, copy=True).reshape(-1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != x.size:
        raise DimensionError(f"方程组维度不一致: A{a.shape}, b({x.size},)")
    n = a.shape[0]
    if n == 0:
        return x

    row_norm = float(np.max(np.sum(np.abs(a), axis=1)))
    threshold = rel_tol * row_norm
    if row_norm == 0.0:
        raise SingularSystemError("系数矩阵全为零")

    for k in range(n):
        # 行交换
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < threshold:
            raise SingularSystemError(f"第 {k} 步主元 {a[p, k]:.3e} 低于阈值 {threshold:.3e}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            x[[k, p]] = x[[p, k]]

        pivot = a[k, k]
        a[k, k:] /= pivot
        x[k] /= pivot

        # 消去第 k 列的其余元素
        col = a[:, k].copy()
        col[k] = 0.0
        a[:, k:] -= np.outer(col, a[k, k:])
        x -= col * x[k]

    return x
