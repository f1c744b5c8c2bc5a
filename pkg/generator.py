# -*- coding: utf-8 -*-
"""
随机 SISDMDP 实例生成器与手工可验证的固定实例

构造规则（对每个分区）：
  - 每个非根状态从编号更小的同分区状态中选一个前驱，保证从根可达
  - 额外前向弧只由低编号指向高编号的非根状态，规范序天然成立
  - 返回根的弧按概率添加，没有其他出弧的状态强制添加
  - 跨分区弧只指向其他分区的根，保持单入口
  - 根之间连成环 s_{0,0} → s_{0,1} → ... → s_{0,K-1} → s_{0,0}，保证全局不可约
动作 a ≥ 1 只扰动权重不改变支撑集，因此任意策略诱导的链都保持上述结构。
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from config import GENERATOR_CONFIG
from errors import ConfigError
from mdp_core import MdpModel, PartitionLayout, SparseChain, triplets_to_csr

logger = logging.getLogger('SISDMDP.Generator')


@dataclass(frozen=True)
class GeneratorConfig:
    n_states: int
    n_partitions: int
    n_actions: int = 1
    seed: int = 0
    forward_arc_rate: float = GENERATOR_CONFIG['forward_arc_rate']
    backward_to_root_prob: float = GENERATOR_CONFIG['backward_to_root_prob']
    cross_arc_rate: float = GENERATOR_CONFIG['cross_arc_rate']
    superstate_extra_rate: float = GENERATOR_CONFIG['superstate_extra_rate']
    perturb_magnitude: float = GENERATOR_CONFIG['perturb_magnitude']
    reward_range: Tuple[float, float] = GENERATOR_CONFIG['reward_range']
    self_loop_prob: float = GENERATOR_CONFIG['self_loop_prob']
    min_weight: float = GENERATOR_CONFIG['min_weight']

    def validate(self):
        if self.n_states < 1 or self.n_partitions < 1:
            raise ConfigError(f"状态数与分区数必须为正: N={self.n_states}, K={self.n_partitions}")
        if self.n_states % self.n_partitions != 0:
            raise ConfigError(f"N={self.n_states} 不能被 K={self.n_partitions} 整除")
        if self.n_actions < 1:
            raise ConfigError(f"动作数必须为正: {self.n_actions}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError(f"种子必须是 64 位无符号整数: {self.seed}")
        for name in ('forward_arc_rate', 'cross_arc_rate', 'superstate_extra_rate'):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} 不能为负: {getattr(self, name)}")
        for name in ('backward_to_root_prob', 'self_loop_prob'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} 必须位于 [0, 1]: {getattr(self, name)}")
        if not 0.0 <= self.perturb_magnitude < 1.0:
            raise ConfigError(f"扰动幅度必须位于 [0, 1): {self.perturb_magnitude}")
        if not 0.0 < self.min_weight <= 1.0:
            raise ConfigError(f"最小权重必须位于 (0, 1]: {self.min_weight}")
        low, high = self.reward_range
        if low > high:
            raise ConfigError(f"回报区间非法: {self.reward_range}")


@dataclass(frozen=True)
class InstanceStats:
    """弧计数：目标在同一分区的弧记为分区内弧，其余为跨分区弧（含根环）"""
    intra_arcs: Tuple[int, ...]
    total_intra_arcs: int
    cross_arcs: int
    root_cycle_arcs: int
    arcs_per_action: Tuple[int, ...]
    density: float


def _structure_arcs(config: GeneratorConfig, layout: PartitionLayout,
                    rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    src: List[int] = []
    dst: List[int] = []
    K = layout.K
    roots = layout.roots

    def add(s: int, t: int):
        src.append(s)
        dst.append(t)

    for r in range(K):
        lo, hi = layout.block(r)
        has_exit = np.zeros(hi - lo, dtype=bool)

        # 前驱骨架
        for s in range(lo + 1, hi):
            p = int(rng.integers(lo, s))
            add(p, s)
            has_exit[p - lo] = True

        # 额外前向弧
        for s in range(lo, hi):
            candidates = hi - 1 - s
            count = min(int(rng.poisson(config.forward_arc_rate)), candidates)
            if count:
                for t in rng.choice(candidates, size=count, replace=False) + s + 1:
                    add(s, int(t))
                has_exit[s - lo] = True

        # 非根自环
        for s in range(lo + 1, hi):
            if rng.random() < config.self_loop_prob:
                add(s, s)

        # 跨分区弧（源为分区内任一非根状态，目标为其他分区的根）
        if K > 1:
            for _ in range(int(rng.poisson(config.cross_arc_rate))):
                s = int(rng.integers(lo + 1, hi)) if hi - lo > 1 else lo
                q = int(rng.integers(0, K - 1))
                q = q + 1 if q >= r else q
                add(s, int(roots[q]))
                has_exit[s - lo] = True

        # 返回根的弧
        for s in range(lo + 1, hi):
            if rng.random() < config.backward_to_root_prob or not has_exit[s - lo]:
                add(s, lo)

    if K > 1:
        for r in range(K):
            add(int(roots[r]), int(roots[(r + 1) % K]))
            for _ in range(int(rng.poisson(config.superstate_extra_rate))):
                q = int(rng.integers(0, K - 1))
                q = q + 1 if q >= r else q
                add(int(roots[r]), int(roots[q]))
    else:
        lo, hi = layout.block(0)
        if hi - lo == 1:
            add(lo, lo)

    # 去重并按 (源, 目标) 排序
    keys = np.unique(np.asarray(src, dtype=np.int64) * layout.n_states + np.asarray(dst, dtype=np.int64))
    return keys // layout.n_states, keys % layout.n_states


def _normalized(src: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    totals = np.bincount(src, weights=weights, minlength=n)
    return weights / totals[src]


def perturb_transition_matrix(base: SparseChain, seed: int, magnitude: float) -> SparseChain:
    """每个权重乘以 (1 + u)，u ~ U[-magnitude, magnitude]，再按行归一化；支撑集不变"""
    if not 0.0 <= magnitude < 1.0:
        raise ConfigError(f"扰动幅度必须位于 [0, 1): {magnitude}")
    if magnitude == 0.0:
        return base
    rng = np.random.default_rng(seed)
    src, dst, prob = base.arcs()
    weights = prob * (1.0 + rng.uniform(-magnitude, magnitude, size=prob.size))
    P = triplets_to_csr(src, dst, _normalized(src, weights, base.n_states), base.n_states)
    return SparseChain(P, base.rewards)


def generate_sisdmdp(config: GeneratorConfig) -> Tuple[MdpModel, PartitionLayout]:
    """按配置（含种子）确定性地生成实例"""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_states
    layout = PartitionLayout.equal_blocks(n, config.n_partitions)

    src, dst = _structure_arcs(config, layout, rng)
    weights = rng.uniform(config.min_weight, 1.0, size=src.size)
    base_P = triplets_to_csr(src, dst, _normalized(src, weights, n), n)
    low, high = config.reward_range
    rewards = rng.uniform(low, high, size=(n, config.n_actions))

    base = SparseChain(base_P, rewards[:, 0])
    transitions = [base.P]
    for _ in range(1, config.n_actions):
        child_seed = int(rng.integers(0, 2 ** 63))
        transitions.append(perturb_transition_matrix(base, child_seed, config.perturb_magnitude).P)

    model = MdpModel(tuple(transitions), rewards, layout)
    logger.debug(f"生成实例 | N={n} K={layout.K} |A|={config.n_actions} seed={config.seed} | 弧数={base_P.nnz}")
    return model, layout


def instance_stats(model: MdpModel, layout: PartitionLayout = None) -> InstanceStats:
    """分区内 / 跨分区弧计数（以动作 0 为准，各动作支撑相同）"""
    layout = model.layout if layout is None else layout
    P = model.transitions[0].tocoo()
    part = layout.partition_of
    same = part[P.row] == part[P.col]
    intra = np.bincount(part[P.row[same]], minlength=layout.K)

    roots = layout.roots
    K = layout.K
    root_cycle = 0
    if K > 1:
        nxt = roots[(np.arange(K) + 1) % K]
        P_csr = model.transitions[0]
        root_cycle = int(sum(1 for r in range(K) if P_csr[int(roots[r]), int(nxt[r])] != 0))

    n = model.n_states
    return InstanceStats(
        intra_arcs=tuple(int(c) for c in intra),
        total_intra_arcs=int(intra.sum()),
        cross_arcs=int(np.count_nonzero(~same)),
        root_cycle_arcs=root_cycle,
        arcs_per_action=tuple(int(T.nnz) for T in model.transitions),
        density=float(P.nnz) / float(n * n),
    )


def fixture_f1() -> Tuple[MdpModel, PartitionLayout]:
    """4 状态、2 分区 {0,1}, {2,3} 的单动作实例，ρ = 6/7"""
    rows = [
        [(1, 0.5), (2, 0.5)],
        [(0, 0.6), (2, 0.4)],
        [(3, 1.0)],
        [(0, 0.7), (2, 0.3)],
    ]
    chain = SparseChain.from_rows(rows, [1.0, 0.0, 2.0, 0.0])
    layout = PartitionLayout(np.array([0, 2, 4]))
    return MdpModel((chain.P,), chain.rewards.reshape(-1, 1), layout), layout


def fixture_fig1b(with_red_arcs: bool = False) -> Tuple[MdpModel, PartitionLayout]:
    """14 状态、3 分区（大小 4, 5, 5）的示例链

    释放状态为 {3}, {7, 8}, {10, 11}。第三个分区按反树形式编号（非根弧由高指向低），
    需要规范重排后才能直接求解。with_red_arcs=True 时加入 6→5，形成不经过根的环。
    """
    arcs = {
        0: [1], 1: [2], 2: [3], 3: [0, 4],
        4: [5], 5: [6, 7], 6: [8], 7: [4, 9], 8: [4, 0],
        9: [12, 13], 10: [9, 0], 11: [9, 4], 12: [10], 13: [11],
    }
    if with_red_arcs:
        arcs[6] = [8, 5]
    rows = [[(t, 1.0 / len(arcs[s])) for t in arcs[s]] for s in range(14)]
    rewards = [1.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 3.0, 0.0, 2.0, 0.0, 1.0, 0.0, 0.0]
    chain = SparseChain.from_rows(rows, rewards)
    layout = PartitionLayout(np.array([0, 4, 9, 14]))
    return MdpModel((chain.P,), chain.rewards.reshape(-1, 1), layout), layout
