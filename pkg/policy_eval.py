# -*- coding: utf-8 -*-
"""
策略评估模块

结构化精确评估分四步：
  1. 各分区自底向上代入，把每个状态的值写成超状态值的仿射函数 V_i = M_i·V_sup + b_i
  2. 抽取各分区根所在行，组成 K×K 超状态方程组
  3. 求解 (I - M_sup) V_sup = b_sup（平均准则下以第 0 个超状态为参考，V_sup[0] = 0）
  4. 把 V_sup 回注到每个分区
另提供两种基线：完整 N 元线性方程组直接求解，以及不动点迭代。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from chain_solvers import INTRA_SOLVERS, chiu_average_reward, gth_steady_state
from config import SOLVER_CONFIG, STOPPING_CONFIG
from errors import (DimensionError, InconsistentSystemError, ModelValidationError, NearAbsorbingStateError,
                    NonCanonicalOrderError, StructureError)
from linalg import gauss_jordan_solve
from mdp_core import PartitionLayout, SparseChain, canonical_violations
from performance_monitor import OpCounter
from stopping import Deadline, StagnationMonitor, linf, span

logger = logging.getLogger('SISDMDP.PolicyEval')

BASELINE_METHODS = ('direct', 'fixed_point')


@dataclass(frozen=True)
class EvalCriterion:
    """评估准则：平均回报，或折扣因子 gamma ∈ [0, 1) 的折扣回报"""
    kind: str = 'average'
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ('average', 'discounted'):
            raise ModelValidationError(f"未知的评估准则: {self.kind}")
        if self.kind == 'discounted':
            if self.gamma is None or not 0.0 <= float(self.gamma) < 1.0:
                raise ModelValidationError(f"折扣因子必须满足 0 ≤ γ < 1，当前为 {self.gamma}")
            object.__setattr__(self, 'gamma', float(self.gamma))
        elif self.gamma is not None:
            raise ModelValidationError("平均准则不接受折扣因子")

    @classmethod
    def average(cls) -> 'EvalCriterion':
        return cls('average')

    @classmethod
    def discounted(cls, gamma: float) -> 'EvalCriterion':
        return cls('discounted', gamma)

    @property
    def is_average(self) -> bool:
        return self.kind == 'average'

    @property
    def lam(self) -> float:
        """Bellman 方程中转移项的系数：平均准则为 1，折扣准则为 γ"""
        return 1.0 if self.is_average else self.gamma

    def __str__(self) -> str:
        return 'average' if self.is_average else f'discounted(γ={self.gamma:g})'


@dataclass(frozen=True, eq=False)
class LocalSystem:
    """分区 r 的局部系统：第 i 行表示 V(lo+i) = M[i]·V_sup + b[i]，第 0 行为根"""
    partition: int
    offset: int
    M: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.b.size


@dataclass(frozen=True, eq=False)
class SuperstateSystem:
    M_sup: np.ndarray
    b_sup: np.ndarray

    @property
    def K(self) -> int:
        return self.b_sup.size


@dataclass(frozen=True, eq=False)
class EvalResult:
    """评估结果；rho 仅在平均准则下给出"""
    V: np.ndarray
    rho: Optional[float]
    residual: float
    converged: bool = True
    iterations: int = 0
    stop_reason: Optional[str] = None
    method: str = 'structured'


def build_local_system(chain: SparseChain, layout: PartitionLayout, r: int, criterion: EvalCriterion,
                       rho: Optional[float] = None, counter: Optional[OpCounter] = None) -> LocalSystem:
    """按编号递减顺序代入分区 r 的 Bellman 方程

    指向任意超状态（含本分区根）的弧计入 M 的对应列；指向本分区非根状态的弧代入该状态已求得的 (M_j, b_j)。
    折扣准则下转移概率在工作副本中乘以 γ，回报不缩放。
    """
    if criterion.is_average and rho is None:
        raise ModelValidationError("平均准则需要提供 ρ")
    if not criterion.is_average and rho is not None:
        raise ModelValidationError("折扣准则不使用 ρ")
    lo, hi = layout.block(r)
    n, K = hi - lo, layout.K
    lam = criterion.lam
    rho = 0.0 if rho is None else float(rho)
    tol = SOLVER_CONFIG['absorbing_tol']

    root_index = layout.root_index
    part = layout.partition_of
    indptr, indices, data = chain.P.indptr, chain.P.indices, chain.P.data
    M = np.zeros((n, K))
    b = np.zeros(n)
    ops = 0

    for i in range(n - 1, -1, -1):
        s = lo + i
        targets = indices[indptr[s]:indptr[s + 1]]
        probs = data[indptr[s]:indptr[s + 1]] * lam

        to_root = root_index[targets] >= 0
        self_loop = (targets == s) & ~to_root
        intra = ~to_root & ~self_loop

        foreign = intra & (part[targets] != r)
        if np.any(foreign):
            t = int(targets[foreign][0])
            raise StructureError(f"状态 {s} 指向其他分区的非根状态 {t}")
        backward = intra & (targets < s)
        if np.any(backward):
            t = int(targets[backward][0])
            raise NonCanonicalOrderError(f"弧 {s}→{t} 违反规范序（需由低编号指向高编号）")

        d = 1.0 - (float(probs[self_loop][0]) if np.any(self_loop) else 0.0)
        if d <= tol:
            raise NearAbsorbingStateError(f"状态 {s} 的自环概率过大 (d={d:.3e})")

        row = np.zeros(K)
        np.add.at(row, root_index[targets[to_root]], probs[to_root])
        sub_rows = targets[intra] - lo
        sub_probs = probs[intra]
        if sub_rows.size:
            row += sub_probs @ M[sub_rows]
            acc = float(sub_probs @ b[sub_rows])
        else:
            acc = 0.0
        M[i] = row / d
        b[i] = (chain.rewards[s] - rho + acc) / d
        ops += int(np.count_nonzero(to_root)) + sub_rows.size * (2 * K + 2) + K + 3

    if counter is not None:
        counter.add(ops)
    return LocalSystem(partition=r, offset=lo, M=M, b=b)


def extract_global_system(locals_: Sequence[LocalSystem]) -> SuperstateSystem:
    """取每个局部系统的根行组成 K×K 系统"""
    K = len(locals_)
    if K == 0:
        raise DimensionError("没有局部系统")
    for r, loc in enumerate(locals_):
        if loc.partition != r:
            raise DimensionError(f"缺少分区 {r} 的局部系统（位置 {r} 处为分区 {loc.partition}）")
        if loc.M.shape[1] != K:
            raise DimensionError(f"分区 {r} 的 M 列数 {loc.M.shape[1]} 与 K={K} 不一致")
    M_sup = np.vstack([loc.M[0] for loc in locals_])
    b_sup = np.array([loc.b[0] for loc in locals_])
    return SuperstateSystem(M_sup=M_sup, b_sup=b_sup)


def solve_superstate_system(system: SuperstateSystem, criterion: EvalCriterion) -> np.ndarray:
    """求解 (I - M_sup) V_sup = b_sup

    平均准则：以 V_sup[0] = 0 替换第 0 个方程后求解，再检查被替换方程的残差。
    """
    K = system.K
    A = np.eye(K) - system.M_sup
    rhs = system.b_sup.copy()
    if not criterion.is_average:
        return gauss_jordan_solve(A, rhs)

    replaced_row, replaced_rhs = A[0].copy(), float(rhs[0])
    A[0] = 0.0
    A[0, 0] = 1.0
    rhs[0] = 0.0
    V_sup = gauss_jordan_solve(A, rhs)

    residual = abs(float(replaced_row @ V_sup) - replaced_rhs)
    if residual > SOLVER_CONFIG['consistency_tol']:
        raise InconsistentSystemError(f"参考方程残差 {residual:.3e} 超限（ρ 可能有误或结构被破坏）")
    logger.debug(f"超状态方程组求解完成 | K={K} | 参考方程残差={residual:.3e}")
    return V_sup


def inject_values(locals_: Sequence[LocalSystem], V_sup: np.ndarray) -> np.ndarray:
    """根取 V_sup，其余状态按 M·V_sup + b 重构"""
    V_sup = np.asarray(V_sup, dtype=float)
    if V_sup.size != len(locals_):
        raise DimensionError(f"V_sup 长度 {V_sup.size} 与分区数 {len(locals_)} 不一致")
    n_total = sum(loc.n for loc in locals_)
    V = np.zeros(n_total)
    for r, loc in enumerate(locals_):
        V[loc.offset] = V_sup[r]
        if loc.n > 1:
            V[loc.offset + 1:loc.offset + loc.n] = loc.M[1:] @ V_sup + loc.b[1:]
    return V


def bellman_residual(chain: SparseChain, V: np.ndarray, criterion: EvalCriterion,
                     rho: Optional[float] = None) -> float:
    """max_s |V(s) - (r(s) - ρ + λ Σ P(s,·)V)|"""
    target = chain.rewards + criterion.lam * (chain.P @ V)
    if criterion.is_average:
        target = target - rho
    return linf(V - target)


def _check_residual(residual: float, method: str):
    if residual > SOLVER_CONFIG['residual_tol']:
        logger.warning(f"⚠️ {method} 评估的 Bellman 残差 {residual:.3e} 超过 {SOLVER_CONFIG['residual_tol']:.0e}")


def evaluate_policy_structured(chain: SparseChain, layout: PartitionLayout, criterion: EvalCriterion,
                               intra_solver: str = 'robb', max_workers: int = 1,
                               counter: Optional[OpCounter] = None) -> EvalResult:
    """结构化精确评估（平均准则先由 Chiu 分解求 ρ）"""
    if chain.n_states != layout.n_states:
        raise DimensionError(f"链的状态数 {chain.n_states} 与分区 {layout.n_states} 不一致")
    if intra_solver not in INTRA_SOLVERS:
        raise ModelValidationError(f"未知的分区内求解器: {intra_solver}")

    rho = None
    if criterion.is_average:
        _, rho = chiu_average_reward(chain, layout, intra_solver, max_workers, counter)

    K = layout.K
    if max_workers and max_workers > 1 and K > 1 and counter is None:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            locals_: List[LocalSystem] = list(executor.map(
                lambda r: build_local_system(chain, layout, r, criterion, rho), range(K)))
    else:
        locals_ = [build_local_system(chain, layout, r, criterion, rho, counter) for r in range(K)]

    V_sup = solve_superstate_system(extract_global_system(locals_), criterion)
    V = inject_values(locals_, V_sup)
    residual = bellman_residual(chain, V, criterion, rho)
    _check_residual(residual, 'structured')
    return EvalResult(V=V, rho=rho, residual=residual, method='structured')


def _direct_solve(chain: SparseChain, criterion: EvalCriterion) -> EvalResult:
    n = chain.n_states
    A = np.eye(n) - criterion.lam * chain.to_dense()
    rhs = np.array(chain.rewards, dtype=float)
    if criterion.is_average:
        # 未知量 x = (ρ, V(1), ..., V(N-1))，V(0) = 0
        A[:, 0] = 1.0
        x = gauss_jordan_solve(A, rhs)
        rho = float(x[0])
        V = x.copy()
        V[0] = 0.0
    else:
        rho = None
        V = gauss_jordan_solve(A, rhs)
    residual = bellman_residual(chain, V, criterion, rho)
    _check_residual(residual, 'direct')
    return EvalResult(V=V, rho=rho, residual=residual, method='direct')


def _fixed_point(chain: SparseChain, criterion: EvalCriterion, epsilon: float, max_iter: int,
                 layout: Optional[PartitionLayout], stagnation, time_budget_s: Optional[float]) -> EvalResult:
    rho = None
    if criterion.is_average:
        if layout is not None:
            # Rob-B 扫描要求规范序，否则分区内改用 GTH
            intra = 'gth' if canonical_violations(chain, layout) else 'robb'
            _, rho = chiu_average_reward(chain, layout, intra)
        else:
            rho = float(np.dot(gth_steady_state(chain.P), chain.rewards))

    window, threshold = stagnation if stagnation is not None else (None, None)
    monitor = StagnationMonitor(window, threshold)
    deadline = Deadline(time_budget_s)
    metric = span if criterion.is_average else linf
    offset = chain.rewards - (rho if rho is not None else 0.0)
    P, lam = chain.P, criterion.lam

    V = np.zeros(chain.n_states)
    stop_reason, iterations = 'max_iter', 0
    while iterations < max_iter:
        if deadline.expired():
            stop_reason = 'budget'
            break
        V_new = offset + lam * (P @ V)
        if criterion.is_average:
            V_new -= V_new[0]
        diff = metric(V_new - V)
        V = V_new
        iterations += 1
        if diff < epsilon:
            stop_reason = 'span' if criterion.is_average else 'linf'
            break
        if monitor.update(diff):
            stop_reason = 'stagnation'
            logger.debug(f"不动点迭代停滞 | 第 {iterations} 次 | 最小差值 {monitor.best:.3e}")
            break

    converged = stop_reason in ('span', 'linf', 'stagnation')
    if stop_reason == 'max_iter':
        logger.warning(f"⚠️ 不动点迭代达到上限 {max_iter} 次仍未收敛")
    residual = bellman_residual(chain, V, criterion, rho)
    return EvalResult(V=V, rho=rho, residual=residual, converged=converged,
                      iterations=iterations, stop_reason=stop_reason, method='fixed_point')


def evaluate_policy_baseline(chain: SparseChain, criterion: EvalCriterion, method: str = 'direct',
                             epsilon: float = None, max_iter: int = None,
                             layout: Optional[PartitionLayout] = None, stagnation=None,
                             time_budget_s: Optional[float] = None) -> EvalResult:
    """基线评估

    direct：Gauss-Jordan 求解完整 N 元方程组；
    fixed_point：V ← r - ρ + λ P V 迭代，平均准则每次迭代后重新锚定 V(0) = 0，
    以 span（平均）或 ℓ∞（折扣）小于 epsilon 停止。
    """
    if method not in BASELINE_METHODS:
        raise ModelValidationError(f"未知的基线评估方法: {method}")
    if method == 'direct':
        return _direct_solve(chain, criterion)
    epsilon = STOPPING_CONFIG['epsilon'] if epsilon is None else epsilon
    max_iter = STOPPING_CONFIG['max_iter'] if max_iter is None else max_iter
    return _fixed_point(chain, criterion, epsilon, max_iter, layout, stagnation, time_budget_s)
