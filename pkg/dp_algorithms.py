# -*- coding: utf-8 -*-
"""
动态规划外层循环：策略迭代（可插拔评估器）、值迭代、相对值迭代
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import SOLVER_CONFIG, STOPPING_CONFIG
from errors import DimensionError, ModelValidationError, StructureError
from mdp_core import MdpModel, Policy, canonical_reorder_model, induce_chain
from performance_monitor import PhaseTimer
from policy_eval import (EvalCriterion, EvalResult, evaluate_policy_baseline,
                         evaluate_policy_structured)
from stopping import Deadline, StagnationMonitor, linf, span

logger = logging.getLogger('SISDMDP.DPAlgorithms')

# Q(s, a) 表：N×|A| 矩阵
QTable = np.ndarray

EVALUATORS = ('structured', 'structured_gth', 'direct', 'fixed_point')


@dataclass
class RunStats:
    iterations: int = 0
    wall_time_s: float = 0.0
    eval_time_s: float = 0.0
    improve_time_s: float = 0.0
    converged: bool = False
    stop_reason: str = 'max_iter'
    policy_trace: Optional[List[Policy]] = field(default=None, repr=False)


def q_values(model: MdpModel, V: np.ndarray, lam: float) -> QTable:
    """Q(s,a) = r(s,a) + λ Σ_s' P^(a)(s,s') V(s')，逐动作稀疏矩阵向量积"""
    V = np.asarray(V, dtype=float)
    if V.size != model.n_states:
        raise DimensionError(f"V 长度 {V.size} 与状态数 {model.n_states} 不一致")
    Q = np.array(model.rewards, dtype=float, copy=True)
    for a, P in enumerate(model.transitions):
        Q[:, a] += lam * (P @ V)
    return Q


def greedy_policy(Q: QTable) -> Policy:
    """每个状态取最小编号的最大值动作"""
    return Policy(np.argmax(Q, axis=1))


def improve_policy(Q: QTable, current: Policy) -> Policy:
    """贪心改进；当前动作与最大值相差不超过 tie_tol 时保留当前动作"""
    Q = np.asarray(Q, dtype=float)
    current = current if isinstance(current, Policy) else Policy(current)
    if Q.shape[0] != len(current):
        raise DimensionError(f"Q 行数 {Q.shape[0]} 与策略长度 {len(current)} 不一致")
    states = np.arange(Q.shape[0])
    best = np.max(Q, axis=1)
    keep = Q[states, current.actions] >= best - SOLVER_CONFIG['tie_tol']
    return Policy(np.where(keep, current.actions, np.argmax(Q, axis=1)))


def best_actions(model: MdpModel, V: np.ndarray, lam: float,
                 current: Optional[Policy] = None) -> Tuple[np.ndarray, Policy]:
    """逐动作流式计算 max_a Q(s,a) 与改进后的策略，不构造 N×|A| 的 Q 表

    与 improve_policy / greedy_policy 的平局规则一致：严格更大才替换，保留最小编号；
    给出 current 时，其 Q 值与最大值相差不超过 tie_tol 的状态保留当前动作。
    """
    V = np.asarray(V, dtype=float)
    if V.size != model.n_states:
        raise DimensionError(f"V 长度 {V.size} 与状态数 {model.n_states} 不一致")
    if current is not None:
        current = current if isinstance(current, Policy) else Policy(current)
        current.validate(model.n_states, model.n_actions)
    best = np.full(model.n_states, -np.inf)
    arg = np.zeros(model.n_states, dtype=np.int64)
    q_current = np.empty(model.n_states)
    for a, P in enumerate(model.transitions):
        q = model.rewards[:, a] + lam * (P @ V)
        better = q > best
        best[better] = q[better]
        arg[better] = a
        if current is not None:
            mine = current.actions == a
            q_current[mine] = q[mine]
    if current is not None:
        keep = q_current >= best - SOLVER_CONFIG['tie_tol']
        arg = np.where(keep, current.actions, arg)
    return best, Policy(arg)


def _streams_q(model: MdpModel) -> bool:
    return model.n_actions * model.n_states > SOLVER_CONFIG['q_table_max_entries']


def _improvement_step(model: MdpModel, V: np.ndarray, lam: float,
                      current: Optional[Policy]) -> Tuple[np.ndarray, Policy]:
    """返回 (max_a Q, 改进策略)；Q 表过大时改为逐动作流式计算"""
    if _streams_q(model):
        return best_actions(model, V, lam, current)
    Q = q_values(model, V, lam)
    policy = greedy_policy(Q) if current is None else improve_policy(Q, current)
    return np.max(Q, axis=1), policy


def _make_evaluator(model: MdpModel, criterion: EvalCriterion, evaluator: str, epsilon: float,
                    max_workers: int, time_budget_s: Optional[float]):
    layout = model.layout
    if evaluator in ('structured', 'structured_gth'):
        intra = 'robb' if evaluator == 'structured' else 'gth'
        return lambda chain: evaluate_policy_structured(chain, layout, criterion, intra, max_workers)
    if evaluator == 'direct':
        return lambda chain: evaluate_policy_baseline(chain, criterion, 'direct')
    return lambda chain: evaluate_policy_baseline(chain, criterion, 'fixed_point', epsilon=epsilon, layout=layout,
                                                  time_budget_s=time_budget_s)


def policy_iteration(model: MdpModel, criterion: EvalCriterion, evaluator: str = 'structured',
                     initial_policy: Optional[Policy] = None, max_iter: int = None, epsilon: float = None,
                     time_budget_s: Optional[float] = None, trace: bool = False,
                     max_workers: int = 1) -> Tuple[Policy, EvalResult, RunStats]:
    """策略迭代：评估 → 计算 Q → 改进，直到策略在所有状态上不再变化

    先按规范序重排一次（结构化评估器必需，基线在无法重排时保持原编号），结果再映射回原编号。
    """
    if evaluator not in EVALUATORS:
        raise ModelValidationError(f"未知的评估器: {evaluator}")
    max_iter = STOPPING_CONFIG['pi_max_iter'] if max_iter is None else max_iter

    try:
        perm, reordered = canonical_reorder_model(model)
    except StructureError:
        if evaluator.startswith('structured'):
            raise
        # 基线评估不依赖分区结构
        perm, reordered = None, model
    if reordered is model:
        perm = None
    model = reordered

    policy = Policy.constant(model.n_states) if initial_policy is None else Policy(initial_policy)
    policy.validate(model.n_states, model.n_actions)
    if perm is not None:
        policy = Policy(policy.actions[perm])

    evaluate = _make_evaluator(model, criterion, evaluator, epsilon, max_workers, time_budget_s)
    timer = PhaseTimer()
    deadline = Deadline(time_budget_s)
    stats = RunStats(policy_trace=[] if trace else None)
    result, evaluated = None, policy

    while stats.iterations < max_iter:
        if deadline.expired():
            stats.stop_reason = 'budget'
            break
        with timer.phase('evaluation'):
            result = evaluate(induce_chain(model, policy))
            evaluated = policy
        with timer.phase('improvement'):
            _, new_policy = _improvement_step(model, result.V, criterion.lam, policy)
        stats.iterations += 1
        if trace:
            stats.policy_trace.append(policy)
        logger.debug(f"策略迭代 第 {stats.iterations} 次 | 变化状态数: {int(np.sum(new_policy.actions != policy.actions))}")
        if new_policy == policy:
            stats.stop_reason = 'policy_fixed'
            stats.converged = True
            break
        policy = new_policy

    if result is None:
        with timer.phase('evaluation'):
            result = evaluate(induce_chain(model, policy))
    else:
        # 提前停止时返回与 result 对应的策略
        policy = evaluated
    if stats.stop_reason == 'max_iter':
        logger.warning(f"⚠️ 策略迭代达到上限 {max_iter} 次仍未收敛")

    stats.wall_time_s = timer.elapsed()
    stats.eval_time_s = timer.get('evaluation')
    stats.improve_time_s = timer.get('improvement')

    if perm is not None:
        policy, result = _restore_order(perm, policy, result)
        if trace:
            stats.policy_trace = [_restore_policy(perm, p) for p in stats.policy_trace]
    return policy, result, stats


def _restore_policy(perm: np.ndarray, policy: Policy) -> Policy:
    actions = np.empty_like(policy.actions)
    actions[perm] = policy.actions
    return Policy(actions)


def _restore_order(perm: np.ndarray, policy: Policy, result: EvalResult) -> Tuple[Policy, EvalResult]:
    V = np.empty_like(result.V)
    V[perm] = result.V
    restored = EvalResult(V=V, rho=result.rho, residual=result.residual, converged=result.converged,
                          iterations=result.iterations, stop_reason=result.stop_reason, method=result.method)
    return _restore_policy(perm, policy), restored


def _run_sweeps(model: MdpModel, lam: float, epsilon: float, max_iter: int, stagnation,
                time_budget_s: Optional[float], relative: bool):
    window, threshold = stagnation if stagnation is not None else (None, None)
    monitor = StagnationMonitor(window, threshold)
    deadline = Deadline(time_budget_s)
    timer = PhaseTimer()
    metric = span if relative else linf
    converged_reason = 'span' if relative else 'linf'

    stats = RunStats()
    V = np.zeros(model.n_states)
    rho = None
    while stats.iterations < max_iter:
        if deadline.expired():
            stats.stop_reason = 'budget'
            break
        with timer.phase('improvement'):
            W, _ = _improvement_step(model, V, lam, None)
            if relative:
                gain = W - V
                rho = 0.5 * (float(np.min(gain)) + float(np.max(gain)))
                W = W - W[0]
        diff = metric(W - V)
        V = W
        stats.iterations += 1
        if diff < epsilon:
            stats.stop_reason = converged_reason
            break
        if monitor.update(diff):
            stats.stop_reason = 'stagnation'
            logger.info(f"⏸️ 停滞判定触发 | 第 {stats.iterations} 次迭代 | 最小差值 {monitor.best:.3e}")
            break

    stats.converged = stats.stop_reason != 'max_iter' and stats.stop_reason != 'budget'
    if stats.stop_reason == 'max_iter':
        logger.warning(f"⚠️ 迭代达到上限 {max_iter} 次仍未收敛")
    stats.wall_time_s = timer.elapsed()
    stats.improve_time_s = timer.get('improvement')
    _, policy = _improvement_step(model, V, lam, None)
    return policy, V, rho, stats


def value_iteration(model: MdpModel, gamma: float, epsilon: float = None, max_iter: int = None,
                    stagnation=None, time_budget_s: Optional[float] = None) -> Tuple[Policy, np.ndarray, RunStats]:
    """V_{k+1} = max_a [r + γ P^(a) V_k]，以 ‖V_{k+1} - V_k‖_∞ < ε 停止"""
    EvalCriterion.discounted(gamma)
    epsilon = STOPPING_CONFIG['epsilon'] if epsilon is None else epsilon
    max_iter = STOPPING_CONFIG['max_iter'] if max_iter is None else max_iter
    policy, V, _, stats = _run_sweeps(model, gamma, epsilon, max_iter, stagnation, time_budget_s, relative=False)
    return policy, V, stats


def relative_value_iteration(model: MdpModel, epsilon: float = None, max_iter: int = None, stagnation=None,
                             time_budget_s: Optional[float] = None) -> Tuple[Policy, np.ndarray, float, RunStats]:
    """相对值迭代，参考状态为 0

    ρ 取增益上下界 min/max(W - V_k) 的中点，收敛时与 W(0) 一致，周期链上也给出准确增益。
    以 span(V_{k+1} - V_k) < ε 停止，或 stagnation=(window, threshold) 判定停滞。
    """
    epsilon = STOPPING_CONFIG['epsilon'] if epsilon is None else epsilon
    max_iter = STOPPING_CONFIG['max_iter'] if max_iter is None else max_iter
    return _run_sweeps(model, 1.0, epsilon, max_iter, stagnation, time_budget_s, relative=True)
