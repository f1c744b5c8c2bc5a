# -*- coding: utf-8 -*-
"""
稳态求解模块

- Rob-B 线性扫描：根在首位、非根弧上三角时按编号递增一次推得 α，再归一化
- GTH 状态约简：无相减运算的稠密求解器
- Chiu 两级分解：分区内系统 A_r → φ_r，超状态系统 B → ψ，Π = [ψ_r·φ_r]
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from config import SOLVER_CONFIG
from errors import (DimensionError, ModelValidationError, NearAbsorbingStateError, NonCanonicalOrderError,
                    ReducibleChainError, StochasticityError)
from mdp_core import PartitionLayout, SparseChain
from performance_monitor import OpCounter

logger = logging.getLogger('SISDMDP.ChainSolvers')

INTRA_SOLVERS = ('robb', 'gth')


@dataclass(frozen=True, eq=False)
class IntraMatrix:
    """分区 r 的分区内随机矩阵 A_r：外部质量全部折叠到第 0 列（根）"""
    partition: int
    offset: int
    A: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.A.toarray()


@dataclass(frozen=True, eq=False)
class ChiuResult:
    """Chiu 分解的中间量与结果"""
    phis: Tuple[np.ndarray, ...]
    B: np.ndarray
    psi: np.ndarray
    pi: np.ndarray
    rho: float


def _as_csr(A) -> sp.csr_matrix:
    if isinstance(A, IntraMatrix):
        A = A.A
    csr = sp.csr_matrix(A, dtype=float)
    if not csr.has_sorted_indices:
        csr = csr.copy()
        csr.sort_indices()
    return csr


def robb_steady_state(A, root: int = 0, counter: Optional[OpCounter] = None) -> np.ndarray:
    """Rob-B 稳态：α(根)=1，α(s) = Σ_{s'<s} α(s')U[s',s] / (1-U[s,s])，按 s 递增扫描"""
    csr = _as_csr(A)
    n = csr.shape[0]
    if csr.shape[1] != n:
        raise DimensionError(f"矩阵必须为方阵: {csr.shape}")
    if root != 0:
        raise NonCanonicalOrderError(f"根必须位于首位，当前为 {root}")
    if n == 1:
        return np.ones(1)

    tol = SOLVER_CONFIG['absorbing_tol']
    indptr, indices, data = csr.indptr, csr.indices, csr.data
    alpha = np.zeros(n)
    inflow = np.zeros(n)
    alpha[0] = 1.0
    ops = 0

    for s in range(n):
        targets = indices[indptr[s]:indptr[s + 1]]
        probs = data[indptr[s]:indptr[s + 1]]
        if s > 0:
            self_mask = targets == s
            if np.any((targets > 0) & (targets < s)):
                bad = int(targets[(targets > 0) & (targets < s)][0])
                raise NonCanonicalOrderError(f"弧 {s}→{bad} 由高编号指向低编号的非根状态")
            d = 1.0 - (float(probs[self_mask][0]) if np.any(self_mask) else 0.0)
            if d <= tol:
                raise NearAbsorbingStateError(f"状态 {s} 的自环概率过大 (d={d:.3e})")
            alpha[s] = inflow[s] / d
            ops += 2
        # 推送到更高编号的状态
        fwd = targets > s
        inflow[targets[fwd]] += alpha[s] * probs[fwd]
        ops += 2 * int(np.count_nonzero(fwd))

    pi = alpha / np.sum(alpha)
    ops += 2 * n
    if counter is not None:
        counter.add(ops)
    return pi


def gth_steady_state(P) -> np.ndarray:
    """GTH 状态约简求稳态分布（稠密，立方复杂度）"""
    A = np.array(P.toarray() if sp.issparse(P) else P, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"矩阵必须为方阵: {A.shape}")
    n = A.shape[0]
    if n == 1:
        return np.ones(1)

    # 约简
    for k in range(n - 1):
        scale = np.sum(A[k, k + 1:n])
        if scale <= 0:
            raise ReducibleChainError(f"第 {k} 步约简质量为零，矩阵可约")
        A[k + 1:n, k] /= scale
        A[k + 1:n, k + 1:n] += np.outer(A[k + 1:n, k], A[k, k + 1:n])

    # 回代
    x = np.zeros(n)
    x[n - 1] = 1.0
    for k in range(n - 2, -1, -1):
        x[k] = np.dot(x[k + 1:n], A[k + 1:n, k])

    return x / np.sum(x)


def build_intra_matrix(chain: SparseChain, layout: PartitionLayout, r: int) -> IntraMatrix:
    """构造 A_r：非根列取 P 原值，根列 = 1 - Σ_{k≥1} P(s_i, s_k)"""
    lo, hi = layout.block(r)
    n = hi - lo
    block = chain.P[lo:hi, lo:hi].tocoo()
    keep = block.col > 0
    nonroot_mass = np.bincount(block.row[keep], weights=block.data[keep], minlength=n)
    redirected = 1.0 - nonroot_mass
    if np.min(redirected) < -SOLVER_CONFIG['stochastic_tol']:
        i = int(np.argmin(redirected))
        raise StochasticityError(f"分区 {r} 第 {i} 行的重定向质量为负 ({redirected[i]:.3e})")
    redirected = np.maximum(redirected, 0.0)

    rows = np.concatenate([block.row[keep], np.arange(n)])
    cols = np.concatenate([block.col[keep], np.zeros(n, dtype=block.col.dtype)])
    vals = np.concatenate([block.data[keep], redirected])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return IntraMatrix(partition=r, offset=lo, A=A)


def build_inter_matrix(chain: SparseChain, layout: PartitionLayout, phis: Sequence[np.ndarray]) -> np.ndarray:
    """构造 B：B(r,q) = Σ_i φ_r(i)·P(s_{i,r}, s_{1,q})（r≠q），对角线取补"""
    K = layout.K
    if len(phis) != K:
        raise DimensionError(f"需要 {K} 个分区稳态向量，实际 {len(phis)}")
    roots = layout.roots
    B = np.zeros((K, K))
    for r in range(K):
        lo, hi = layout.block(r)
        phi = np.asarray(phis[r], dtype=float)
        if phi.size != hi - lo:
            raise DimensionError(f"φ_{r} 长度 {phi.size} 与分区大小 {hi - lo} 不一致")
        flow = chain.P[lo:hi].T @ phi
        B[r] = flow[roots]
        B[r, r] = 0.0
        off = float(np.sum(B[r]))
        if off > 1.0 + SOLVER_CONFIG['stochastic_tol']:
            raise StochasticityError(f"B 第 {r} 行非对角元之和 {off:.15g} 超过 1")
        B[r, r] = max(0.0, 1.0 - off)
    return B


def _intra_phi(chain: SparseChain, layout: PartitionLayout, r: int, intra_solver: str,
               counter: Optional[OpCounter]) -> np.ndarray:
    lo, hi = layout.block(r)
    if hi - lo == 1:
        return np.ones(1)
    intra = build_intra_matrix(chain, layout, r)
    if intra_solver == 'robb':
        return robb_steady_state(intra, counter=counter)
    return gth_steady_state(intra.A)


def chiu_decomposition(chain: SparseChain, layout: PartitionLayout, intra_solver: str = 'robb',
                       max_workers: int = 1, counter: Optional[OpCounter] = None) -> ChiuResult:
    """Chiu 两级分解的完整结果"""
    if intra_solver not in INTRA_SOLVERS:
        raise ModelValidationError(f"未知的分区内求解器: {intra_solver}")
    if chain.n_states != layout.n_states:
        raise DimensionError(f"链的状态数 {chain.n_states} 与分区 {layout.n_states} 不一致")

    K = layout.K
    if max_workers and max_workers > 1 and K > 1 and counter is None:
        # 各分区互相独立，按分区顺序收集结果
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            phis = list(executor.map(lambda r: _intra_phi(chain, layout, r, intra_solver, None), range(K)))
    else:
        phis = [_intra_phi(chain, layout, r, intra_solver, counter) for r in range(K)]

    B = build_inter_matrix(chain, layout, phis)
    psi = gth_steady_state(B)
    pi = np.concatenate([psi[r] * phis[r] for r in range(K)])

    total = float(np.sum(pi))
    if abs(total - 1.0) > SOLVER_CONFIG['renorm_warn_tol']:
        logger.warning(f"⚠️ Π 归一化偏差 {abs(total - 1.0):.3e}，已重新归一化")
    pi = pi / total
    rho = float(np.dot(pi, chain.rewards))
    logger.debug(f"Chiu 分解完成 | K={K} | 求解器={intra_solver} | ρ={rho:.12g}")
    return ChiuResult(phis=tuple(phis), B=B, psi=psi, pi=pi, rho=rho)


def chiu_average_reward(chain: SparseChain, layout: PartitionLayout, intra_solver: str = 'robb',
                        max_workers: int = 1, counter: Optional[OpCounter] = None) -> Tuple[np.ndarray, float]:
    """返回 (Π, ρ)，ρ = Σ_s Π(s)·r(s)"""
    result = chiu_decomposition(chain, layout, intra_solver, max_workers, counter)
    return result.pi, result.rho
