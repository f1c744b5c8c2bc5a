# -*- coding: utf-8 -*-
"""
基准测试模块：算法注册表、网格运行、求解器交叉对比
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from chain_solvers import chiu_average_reward, gth_steady_state
from config import BENCH_CONFIG, SOLVER_CONFIG, STOPPING_CONFIG
from dp_algorithms import policy_iteration, relative_value_iteration, value_iteration
from errors import BenchSpecError, DimensionError, SisdmdpError
from generator import GeneratorConfig, generate_sisdmdp, instance_stats
from mdp_core import (MdpModel, PartitionLayout, Policy, StructureReport, canonical_reorder,
                      induce_chain, validate_structure)
from parallel_runner import ParallelRunner
from policy_eval import EvalCriterion, evaluate_policy_baseline, evaluate_policy_structured
from stopping import linf

logger = logging.getLogger('SISDMDP.Bench')


@dataclass(frozen=True)
class AlgorithmInfo:
    criterion: str
    kind: str                       # 'pi' | 'vi' | 'rvi'
    evaluator: Optional[str] = None


ALGORITHMS: Dict[str, AlgorithmInfo] = {
    'MRPI+Chiu+RB': AlgorithmInfo('average', 'pi', 'structured'),
    'MRPI+Chiu+GTH': AlgorithmInfo('average', 'pi', 'structured_gth'),
    'RPI+FP': AlgorithmInfo('average', 'pi', 'fixed_point'),
    'RPI+GJ': AlgorithmInfo('average', 'pi', 'direct'),
    'RVI': AlgorithmInfo('average', 'rvi'),
    'MPI+Chiu+RB': AlgorithmInfo('discounted', 'pi', 'structured'),
    'PI+FP': AlgorithmInfo('discounted', 'pi', 'fixed_point'),
    'PI+GJ': AlgorithmInfo('discounted', 'pi', 'direct'),
    'VI': AlgorithmInfo('discounted', 'vi'),
}


def default_algorithms(criterion: str) -> Tuple[str, ...]:
    key = 'average_algorithms' if criterion == 'average' else 'discounted_algorithms'
    return tuple(BENCH_CONFIG[key])


@dataclass(frozen=True)
class BenchSpec:
    """基准测试描述：grid 中每个元素为 (动作数, N, K)"""
    grid: Tuple[Tuple[int, int, int], ...]
    algorithms: Tuple[str, ...]
    criterion: str = 'average'
    gamma: float = BENCH_CONFIG['gamma']
    epsilon: float = STOPPING_CONFIG['epsilon']
    max_iter: Optional[int] = None
    seeds: Tuple[int, ...] = (0,)
    time_budget_s: Optional[float] = BENCH_CONFIG['time_budget_s']

    def __post_init__(self):
        object.__setattr__(self, 'grid', tuple(tuple(int(x) for x in point) for point in self.grid))
        object.__setattr__(self, 'algorithms', tuple(self.algorithms))
        object.__setattr__(self, 'seeds', tuple(int(s) for s in self.seeds))

    @property
    def eval_criterion(self) -> EvalCriterion:
        if self.criterion == 'average':
            return EvalCriterion.average()
        return EvalCriterion.discounted(self.gamma)

    def validate(self):
        if self.criterion not in ('average', 'discounted'):
            raise BenchSpecError(f"未知的评估准则: {self.criterion}")
        if self.criterion == 'discounted' and not 0.0 <= self.gamma < 1.0:
            raise BenchSpecError(f"折扣因子必须满足 0 ≤ γ < 1，当前为 {self.gamma}")
        if not self.grid:
            raise BenchSpecError("网格为空")
        for n_actions, n_states, n_partitions in self.grid:
            if n_actions < 1 or n_states < 1 or n_partitions < 1 or n_states % n_partitions:
                raise BenchSpecError(f"网格点非法: (|A|={n_actions}, N={n_states}, K={n_partitions})")
        if not self.algorithms:
            raise BenchSpecError("算法列表为空")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise BenchSpecError(f"未知算法: {name}（可选: {', '.join(ALGORITHMS)}）")
            if ALGORITHMS[name].criterion != self.criterion:
                raise BenchSpecError(f"算法 {name} 不适用于 {self.criterion} 准则")
        if not self.seeds:
            raise BenchSpecError("种子列表为空")
        if self.time_budget_s is not None and self.time_budget_s < 0:
            raise BenchSpecError(f"时间预算不能为负: {self.time_budget_s}")


@dataclass
class BenchRecord:
    algorithm: str
    criterion: str
    actions: int
    states: int
    partitions: int
    seed: int
    wall_time_s: float
    iterations: int
    rho: Optional[float]
    converged: bool
    stop_reason: str
    total_intra_arcs: int
    over_budget: bool = False
    v_min: Optional[float] = None
    v_max: Optional[float] = None
    v_mean: Optional[float] = None
    fastest: bool = False
    error: Optional[str] = None

    @property
    def grid_key(self) -> Tuple[str, int, int, int, int]:
        return self.criterion, self.actions, self.states, self.partitions, self.seed


def run_algorithm(name: str, model: MdpModel, spec: BenchSpec):
    """运行单个算法，返回 (V, ρ, 迭代次数, 是否收敛, 停止原因)"""
    info = ALGORITHMS[name]
    budget = spec.time_budget_s
    if info.kind == 'pi':
        _, result, stats = policy_iteration(model, spec.eval_criterion, info.evaluator,
                                            max_iter=spec.max_iter, epsilon=spec.epsilon,
                                            time_budget_s=budget)
        return result.V, result.rho, stats.iterations, stats.converged, stats.stop_reason
    if info.kind == 'vi':
        _, V, stats = value_iteration(model, spec.gamma, spec.epsilon, spec.max_iter, time_budget_s=budget)
        return V, None, stats.iterations, stats.converged, stats.stop_reason
    _, V, rho, stats = relative_value_iteration(model, spec.epsilon, spec.max_iter, time_budget_s=budget)
    return V, rho, stats.iterations, stats.converged, stats.stop_reason


def _run_task(task: Tuple[BenchSpec, Tuple[int, int, int], int]) -> List[BenchRecord]:
    """单个 (网格点, 种子) 任务：生成实例并依次运行全部算法"""
    spec, (n_actions, n_states, n_partitions), seed = task
    model, layout = generate_sisdmdp(GeneratorConfig(n_states, n_partitions, n_actions, seed))
    total_intra = instance_stats(model, layout).total_intra_arcs
    records = []
    for name in spec.algorithms:
        record = BenchRecord(
            algorithm=name, criterion=spec.criterion, actions=n_actions, states=n_states,
            partitions=n_partitions, seed=seed, wall_time_s=0.0, iterations=0, rho=None,
            converged=False, stop_reason='error', total_intra_arcs=total_intra,
        )
        start = time.perf_counter()
        try:
            V, rho, iterations, converged, stop_reason = run_algorithm(name, model, spec)
            record.iterations = iterations
            record.rho = rho
            record.converged = converged
            record.stop_reason = stop_reason
            record.v_min, record.v_max, record.v_mean = float(np.min(V)), float(np.max(V)), float(np.mean(V))
        except SisdmdpError as e:
            record.error = f"{type(e).__name__}: {e}"
            logger.error(f"❌ {name} 运行失败 | N={n_states} K={n_partitions} seed={seed} | {record.error}")
        record.wall_time_s = time.perf_counter() - start
        budget = spec.time_budget_s
        record.over_budget = budget is not None and (record.stop_reason == 'budget' or record.wall_time_s > budget)
        records.append(record)
    return records


def flag_fastest(records: Sequence[BenchRecord]):
    """每个 (网格点, 种子) 中耗时最短的已收敛且未超预算的记录标记为 fastest"""
    groups: Dict[tuple, List[BenchRecord]] = {}
    for rec in records:
        rec.fastest = False
        groups.setdefault(rec.grid_key, []).append(rec)
    for group in groups.values():
        eligible = [r for r in group if r.converged and not r.over_budget and r.error is None]
        if eligible:
            min(eligible, key=lambda r: r.wall_time_s).fastest = True


def run_bench(spec: BenchSpec, max_workers: Optional[int] = None, progress: Optional[bool] = None) -> List[BenchRecord]:
    """按网格顺序、种子顺序、算法顺序返回记录"""
    spec.validate()
    progress = BENCH_CONFIG['progress'] if progress is None else progress
    tasks = [(spec, point, seed) for point in spec.grid for seed in spec.seeds]
    logger.info(f"🚀 开始基准测试 | 任务数: {len(tasks)} | 算法: {', '.join(spec.algorithms)}")
    runner = ParallelRunner(max_workers, progress)
    records = [rec for batch in runner.run(_run_task, tasks, desc='基准测试') for rec in batch]
    flag_fastest(records)
    n_budget = sum(r.over_budget for r in records)
    logger.info(f"✅ 基准测试完成 | 记录数: {len(records)} | 超预算: {n_budget}")
    return records


@dataclass
class ComparisonReport:
    """求解器两两对比：gaps 为 (名称, ℓ∞ 差值或残差)"""
    structure: StructureReport
    criterion: str
    gaps: List[Tuple[str, float]] = field(default_factory=list)
    reordered: bool = False

    @property
    def validated(self) -> bool:
        return self.structure.ok

    @property
    def max_gap(self) -> float:
        return max((g for _, g in self.gaps), default=0.0)

    def passed(self, tol: float = None) -> bool:
        tol = SOLVER_CONFIG['steady_state_tol'] if tol is None else tol
        return self.validated and bool(self.gaps) and self.max_gap <= tol

    def lines(self) -> List[str]:
        out = [f"结构校验: {self.structure.summary()}"]
        if not self.validated:
            out.append("结构校验未通过，未进行求解")
            return out
        if self.reordered:
            out.append("已按规范序重排状态")
        out.extend(f"{name:<32} {gap:.3e}" for name, gap in self.gaps)
        return out


def compare_solvers(model: MdpModel, layout: PartitionLayout, criterion: EvalCriterion,
                    policy: Optional[Policy] = None) -> ComparisonReport:
    """在稠密基准上对比：结构化 vs 直接求解的 V，Chiu vs 全链 GTH 的 Π，ρ 一致性与 Bellman 残差"""
    if model.n_states > BENCH_CONFIG['compare_max_states']:
        raise DimensionError(f"对比需要稠密求解，N={model.n_states} 超过上限 {BENCH_CONFIG['compare_max_states']}")
    policy = Policy.constant(model.n_states) if policy is None else policy
    chain = induce_chain(model, policy)
    structure = validate_structure(chain, layout)
    report = ComparisonReport(structure=structure, criterion=str(criterion))
    if not structure.ok:
        logger.warning(f"⚠️ 结构校验未通过: {structure.summary()}")
        return report

    if not structure.canonical_order_ok:
        _, chain, layout = canonical_reorder(chain, layout)
        report.reordered = True

    structured = evaluate_policy_structured(chain, layout, criterion)
    direct = evaluate_policy_baseline(chain, criterion, 'direct')
    report.gaps.append(('V structured vs direct', linf(structured.V - direct.V)))

    pi_chiu, rho_chiu = chiu_average_reward(chain, layout)
    pi_gth = gth_steady_state(chain.P)
    report.gaps.append(('Π Chiu vs GTH', linf(pi_chiu - pi_gth)))
    rho_gth = float(np.dot(pi_gth, chain.rewards))
    report.gaps.append(('ρ Chiu vs GTH', abs(rho_chiu - rho_gth)))
    if criterion.is_average:
        report.gaps.append(('ρ Chiu vs direct', abs(rho_chiu - direct.rho)))
    report.gaps.append(('residual structured', structured.residual))
    report.gaps.append(('residual direct', direct.residual))

    logger.info(f"📊 求解器对比完成 | 最大差值 {report.max_gap:.3e}")
    return report
