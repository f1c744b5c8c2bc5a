# -*- coding: utf-8 -*-
"""
SISDMDP 领域类型与结构校验模块

状态编号从 0 开始；每个分区是一段连续编号，分区第一个状态即为该分区的超状态（根）。
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from config import SOLVER_CONFIG
from errors import (DimensionError, InvalidActionError, StochasticityError,
                    StructureError)

logger = logging.getLogger('SISDMDP.MdpCore')

Arc = Tuple[int, int]


def _canonical_csr(matrix, n_states: Optional[int] = None) -> sp.csr_matrix:
    """转换为有序、无重复、无显式零元的 CSR 矩阵"""
    csr = sp.csr_matrix(matrix, dtype=float, copy=True)
    if csr.shape[0] != csr.shape[1]:
        raise DimensionError(f"转移矩阵必须为方阵: {csr.shape}")
    if n_states is not None and csr.shape[0] != n_states:
        raise DimensionError(f"转移矩阵维度 {csr.shape[0]} 与状态数 {n_states} 不一致")
    csr.sort_indices()
    rows = np.repeat(np.arange(csr.shape[0]), np.diff(csr.indptr))
    dup = (csr.indices[1:] == csr.indices[:-1]) & (rows[1:] == rows[:-1])
    if np.any(dup):
        k = int(np.argmax(dup))
        raise StochasticityError(f"状态 {rows[k]} 存在重复目标 {csr.indices[k]}")
    csr.eliminate_zeros()
    return csr


def check_stochastic(P: sp.csr_matrix, tol: float = None) -> Tuple[bool, float, int]:
    """检查行随机性，返回 (是否通过, 最大行偏差, 偏差最大的行)"""
    tol = SOLVER_CONFIG['stochastic_tol'] if tol is None else tol
    if P.shape[0] == 0:
        return True, 0.0, -1
    if P.nnz and np.min(P.data) < 0:
        rows = np.repeat(np.arange(P.shape[0]), np.diff(P.indptr))
        worst_row = int(rows[np.argmin(P.data)])
        return False, float(-np.min(P.data)), worst_row
    deficit = np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0)
    worst_row = int(np.argmax(deficit))
    worst = float(deficit[worst_row])
    return worst <= tol, worst, worst_row


@dataclass(frozen=True, eq=False)
class SparseChain:
    """策略诱导的稀疏马尔可夫链 P^(π) 及每状态回报 r(s, π(s))"""
    P: sp.csr_matrix
    rewards: np.ndarray

    def __post_init__(self):
        P = _canonical_csr(self.P)
        rewards = np.array(self.rewards, dtype=float).reshape(-1)
        if rewards.shape[0] != P.shape[0]:
            raise DimensionError(f"回报长度 {rewards.shape[0]} 与状态数 {P.shape[0]} 不一致")
        if P.shape[0] < 1:
            raise DimensionError("状态数必须为正")
        ok, worst, row = check_stochastic(P)
        if not ok:
            raise StochasticityError(f"状态 {row} 的转移概率不合法（偏差 {worst:.3e}）")
        rewards.flags.writeable = False
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'rewards', rewards)

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[Tuple[int, float]]], rewards) -> 'SparseChain':
        """由每行 (目标, 概率) 列表构造"""
        src, dst, prob = [], [], []
        for s, row in enumerate(rows):
            for t, p in row:
                src.append(s)
                dst.append(t)
                prob.append(p)
        n = len(rows)
        return cls(triplets_to_csr(src, dst, prob, n), rewards)

    @classmethod
    def from_dense(cls, matrix, rewards) -> 'SparseChain':
        return cls(sp.csr_matrix(np.asarray(matrix, dtype=float)), rewards)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def row(self, s: int) -> Tuple[np.ndarray, np.ndarray]:
        """第 s 行的 (目标, 概率)"""
        lo, hi = self.P.indptr[s], self.P.indptr[s + 1]
        return self.P.indices[lo:hi], self.P.data[lo:hi]

    def arcs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """所有弧 (源, 目标, 概率)，按行及目标排序"""
        src = np.repeat(np.arange(self.n_states), np.diff(self.P.indptr))
        return src, self.P.indices.copy(), self.P.data.copy()

    def to_dense(self) -> np.ndarray:
        return self.P.toarray()


def triplets_to_csr(src, dst, prob, n: int) -> sp.csr_matrix:
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    prob = np.asarray(prob, dtype=float)
    if src.size and (src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n):
        raise DimensionError(f"弧的端点超出状态范围 0..{n - 1}")
    if src.size:
        keys = src * n + dst
        if np.unique(keys).size != keys.size:
            raise StochasticityError("同一行中存在重复目标")
    # coo -> csr 不会合并（已检查无重复）
    return sp.coo_matrix((prob, (src, dst)), shape=(n, n)).tocsr()


@dataclass(frozen=True, eq=False)
class PartitionLayout:
    """K 个连续分区的边界 0 = b_0 < b_1 < ... < b_K = N"""
    boundaries: np.ndarray

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=np.int64).reshape(-1)
        if b.size < 2:
            raise DimensionError("至少需要一个分区（K ≥ 1）")
        if b[0] != 0:
            raise DimensionError("分区边界必须从 0 开始")
        if np.any(np.diff(b) <= 0):
            raise DimensionError(f"分区边界必须严格递增且每个分区非空: {b.tolist()}")
        b.flags.writeable = False
        object.__setattr__(self, 'boundaries', b)

    @classmethod
    def equal_blocks(cls, n_states: int, n_partitions: int) -> 'PartitionLayout':
        if n_partitions < 1 or n_states % n_partitions != 0:
            raise DimensionError(f"N={n_states} 不能被 K={n_partitions} 整除")
        size = n_states // n_partitions
        return cls(np.arange(0, n_states + 1, size))

    @property
    def K(self) -> int:
        return self.boundaries.size - 1

    @property
    def n_states(self) -> int:
        return int(self.boundaries[-1])

    @property
    def roots(self) -> np.ndarray:
        return self.boundaries[:-1]

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def block(self, r: int) -> Tuple[int, int]:
        """分区 r 的半开区间 [lo, hi)"""
        return int(self.boundaries[r]), int(self.boundaries[r + 1])

    @cached_property
    def partition_of(self) -> np.ndarray:
        """每个状态所属分区"""
        out = np.repeat(np.arange(self.K), self.sizes)
        out.flags.writeable = False
        return out

    @cached_property
    def root_index(self) -> np.ndarray:
        """根状态 → 分区编号，非根状态 → -1"""
        out = np.full(self.n_states, -1, dtype=np.int64)
        out[self.roots] = np.arange(self.K)
        out.flags.writeable = False
        return out

    @property
    def is_root(self) -> np.ndarray:
        return self.root_index >= 0

    def __eq__(self, other) -> bool:
        return isinstance(other, PartitionLayout) and np.array_equal(self.boundaries, other.boundaries)

    def __hash__(self) -> int:
        return hash(tuple(self.boundaries.tolist()))


@dataclass(frozen=True, eq=False)
class MdpModel:
    """每个动作一张稀疏转移矩阵，回报矩阵 r(s, a) 为 N×|A|，所有动作共享分区"""
    transitions: Tuple[sp.csr_matrix, ...]
    rewards: np.ndarray
    layout: PartitionLayout

    def __post_init__(self):
        n = self.layout.n_states
        mats = tuple(_canonical_csr(P, n) for P in self.transitions)
        if not mats:
            raise DimensionError("至少需要一个动作")
        for a, P in enumerate(mats):
            ok, worst, row = check_stochastic(P)
            if not ok:
                raise StochasticityError(f"动作 {a} 在状态 {row} 的转移概率不合法（偏差 {worst:.3e}）")
        rewards = np.array(self.rewards, dtype=float)
        if rewards.ndim == 1:
            rewards = rewards.reshape(-1, 1)
        if rewards.shape != (n, len(mats)):
            raise DimensionError(f"回报矩阵形状 {rewards.shape} 应为 {(n, len(mats))}")
        rewards.flags.writeable = False
        object.__setattr__(self, 'transitions', mats)
        object.__setattr__(self, 'rewards', rewards)

    @property
    def n_states(self) -> int:
        return self.layout.n_states

    @property
    def n_actions(self) -> int:
        return len(self.transitions)

    @cached_property
    def stacked(self) -> sp.csr_matrix:
        """纵向堆叠的 (|A|·N)×N 矩阵，第 a·N + s 行即 P^(a) 的第 s 行"""
        return sp.vstack(self.transitions, format='csr')

    def chain(self, action: int) -> SparseChain:
        return SparseChain(self.transitions[action], self.rewards[:, action])


@dataclass(frozen=True, eq=False)
class Policy:
    """确定性平稳策略：每个状态一个动作编号"""
    actions: np.ndarray

    def __post_init__(self):
        acts = np.array(self.actions, dtype=np.int64).reshape(-1)
        acts.flags.writeable = False
        object.__setattr__(self, 'actions', acts)

    @classmethod
    def constant(cls, n_states: int, action: int = 0) -> 'Policy':
        return cls(np.full(n_states, action, dtype=np.int64))

    def validate(self, n_states: int, n_actions: int):
        if self.actions.size != n_states:
            raise DimensionError(f"策略长度 {self.actions.size} 与状态数 {n_states} 不一致")
        bad = (self.actions < 0) | (self.actions >= n_actions)
        if np.any(bad):
            s = int(np.argmax(bad))
            raise InvalidActionError(f"状态 {s} 的动作 {int(self.actions[s])} 超出 0..{n_actions - 1}")

    def __len__(self) -> int:
        return int(self.actions.size)

    def __getitem__(self, s):
        return self.actions[s]

    def __eq__(self, other) -> bool:
        return isinstance(other, Policy) and np.array_equal(self.actions, other.actions)

    def __hash__(self) -> int:
        return hash(self.actions.tobytes())

    def __repr__(self) -> str:
        return f"Policy({self.actions.tolist()})"


@dataclass
class StructureReport:
    """结构校验报告：违规以列表给出，不抛异常"""
    stochastic_ok: bool
    worst_row_deficit: float
    single_input_violations: List[Arc] = field(default_factory=list)
    single_cycle_violations: List[List[Arc]] = field(default_factory=list)
    canonical_violations: List[Arc] = field(default_factory=list)
    irreducible: bool = True
    aperiodic: bool = True

    @property
    def single_input_ok(self) -> bool:
        return not self.single_input_violations

    @property
    def single_cycle_ok(self) -> bool:
        return not self.single_cycle_violations

    @property
    def canonical_order_ok(self) -> bool:
        return not self.canonical_violations

    @property
    def is_sisdmc_sc(self) -> bool:
        return self.stochastic_ok and self.single_input_ok and self.single_cycle_ok

    @property
    def ok(self) -> bool:
        """平均准则所需的全部条件（非周期性仅作提示）"""
        return self.is_sisdmc_sc and self.irreducible

    def summary(self) -> str:
        return (f"stochastic={self.stochastic_ok} single_input={self.single_input_ok} "
                f"single_cycle={self.single_cycle_ok} canonical={self.canonical_order_ok} "
                f"irreducible={self.irreducible} aperiodic={self.aperiodic}")


@dataclass(frozen=True)
class ReleaseClassification:
    """每个分区的释放状态集 S_{r,R} 与非释放状态集"""
    release: Tuple[Tuple[int, ...], ...]
    non_release: Tuple[Tuple[int, ...], ...]


def induce_chain(model: MdpModel, policy) -> SparseChain:
    """按策略逐行选取 P^(π(s)) 与 r(s, π(s))"""
    pol = policy if isinstance(policy, Policy) else Policy(policy)
    pol.validate(model.n_states, model.n_actions)
    n = model.n_states
    states = np.arange(n)
    P = model.stacked[pol.actions * n + states]
    return SparseChain(P, model.rewards[states, pol.actions])


def _intra_masks(src: np.ndarray, dst: np.ndarray, layout: PartitionLayout):
    part = layout.partition_of
    is_root = layout.is_root
    same = part[src] == part[dst]
    intra_nonroot = same & ~is_root[src] & ~is_root[dst] & (src != dst)
    return same, intra_nonroot


def _cycle_witnesses(src: np.ndarray, dst: np.ndarray) -> List[List[Arc]]:
    """非根子图中每个非平凡强连通分量给出一个环作为证据"""
    G = nx.DiGraph()
    G.add_edges_from(zip(src.tolist(), dst.tolist()))
    witnesses = []
    for comp in nx.strongly_connected_components(G):
        if len(comp) < 2:
            continue
        cycle = nx.find_cycle(G.subgraph(comp))
        witnesses.append([(int(u), int(v)) for u, v in cycle])
    witnesses.sort()
    return witnesses


def _backward_arcs(src: np.ndarray, dst: np.ndarray, layout: PartitionLayout) -> List[Arc]:
    same, _ = _intra_masks(src, dst, layout)
    backward = same & ~layout.is_root[dst] & (src > dst)
    return [(int(s), int(t)) for s, t in zip(src[backward], dst[backward])]


def canonical_violations(chain: SparseChain, layout: PartitionLayout) -> List[Arc]:
    """分区内指向非根状态的由高到低编号的弧；为空即满足规范序"""
    if chain.n_states != layout.n_states:
        raise DimensionError(f"链的状态数 {chain.n_states} 与分区 {layout.n_states} 不一致")
    src, dst, _ = chain.arcs()
    return _backward_arcs(src, dst, layout)


def validate_ergodic(chain: SparseChain) -> Tuple[bool, bool]:
    """不可约性（单一强连通分量）与状态 0 所在分量的非周期性"""
    n_comp, labels = csgraph.connected_components(chain.P, directed=True, connection='strong')
    irreducible = n_comp == 1
    members = np.flatnonzero(labels == labels[0])
    sub = chain.P[members][:, members]
    G = nx.from_scipy_sparse_array(sub, create_using=nx.DiGraph)
    aperiodic = bool(nx.is_aperiodic(G))
    if not aperiodic:
        logger.warning("⚠️ 链是周期的（仅提示，直接求解不受影响）")
    return bool(irreducible), aperiodic


def validate_structure(chain: SparseChain, layout: PartitionLayout) -> StructureReport:
    """校验单入口、单环（Rob-B）、规范序、不可约与非周期性"""
    if chain.n_states != layout.n_states:
        raise DimensionError(f"链的状态数 {chain.n_states} 与分区 {layout.n_states} 不一致")
    stochastic_ok, worst, _ = check_stochastic(chain.P)
    src, dst, _ = chain.arcs()
    same, intra_nonroot = _intra_masks(src, dst, layout)
    is_root = layout.is_root

    entry = ~same & ~is_root[dst]
    single_input = [(int(s), int(t)) for s, t in zip(src[entry], dst[entry])]

    canonical = _backward_arcs(src, dst, layout)

    # 所有非根弧由低到高时子图必然无环
    cycles = _cycle_witnesses(src[intra_nonroot], dst[intra_nonroot]) if canonical else []

    irreducible, aperiodic = validate_ergodic(chain)
    report = StructureReport(
        stochastic_ok=stochastic_ok,
        worst_row_deficit=worst,
        single_input_violations=single_input,
        single_cycle_violations=cycles,
        canonical_violations=canonical,
        irreducible=irreducible,
        aperiodic=aperiodic,
    )
    logger.debug(f"结构校验 | {report.summary()}")
    return report


def validate_model(model: MdpModel) -> List[StructureReport]:
    """逐动作校验结构（策略闭包性保证所有策略同样满足）"""
    return [validate_structure(model.chain(a), model.layout) for a in range(model.n_actions)]


def classify_release_states(chain: SparseChain, layout: PartitionLayout) -> ReleaseClassification:
    """划分释放状态：无指向本分区非根状态的弧，且至少有一条指向超状态的弧"""
    if chain.n_states != layout.n_states:
        raise DimensionError(f"链的状态数 {chain.n_states} 与分区 {layout.n_states} 不一致")
    n = chain.n_states
    out_degree = np.diff(chain.P.indptr)
    if np.any(out_degree == 0):
        s = int(np.argmax(out_degree == 0))
        raise StochasticityError(f"状态 {s} 没有出弧")
    src, dst, _ = chain.arcs()
    same, _ = _intra_masks(src, dst, layout)
    # 自环由 d(s) 吸收，不计为分区内弧
    to_intra = same & ~layout.is_root[dst] & (src != dst)
    n_intra = np.bincount(src[to_intra], minlength=n)
    n_sup = np.bincount(src[layout.is_root[dst]], minlength=n)
    is_release = (n_intra == 0) & (n_sup > 0) & ~layout.is_root

    release, non_release = [], []
    for r in range(layout.K):
        lo, hi = layout.block(r)
        states = np.arange(lo, hi)
        release.append(tuple(int(s) for s in states[is_release[lo:hi]]))
        non_release.append(tuple(int(s) for s in states[~is_release[lo:hi]]))
    return ReleaseClassification(tuple(release), tuple(non_release))


def _canonical_permutation(src: np.ndarray, dst: np.ndarray, layout: PartitionLayout) -> np.ndarray:
    """分区内非根子图的拓扑序（根保持首位，按原编号打破平局）"""
    _, intra_nonroot = _intra_masks(src, dst, layout)
    s, t = src[intra_nonroot], dst[intra_nonroot]
    perm = np.arange(layout.n_states)
    backward = s > t
    if not np.any(backward):
        return perm
    part = layout.partition_of
    for r in np.unique(part[s[backward]]):
        lo, hi = layout.block(int(r))
        in_block = part[s] == r
        G = nx.DiGraph()
        G.add_nodes_from(range(lo + 1, hi))
        G.add_edges_from(zip(s[in_block].tolist(), t[in_block].tolist()))
        try:
            order = list(nx.lexicographical_topological_sort(G))
        except nx.NetworkXUnfeasible as e:
            raise StructureError(f"分区 {int(r)} 的非根状态之间存在环，无法规范排序") from e
        perm[lo + 1:hi] = order
    return perm


def _permute_matrix(P: sp.csr_matrix, perm: np.ndarray) -> sp.csr_matrix:
    out = P[perm][:, perm].tocsr()
    out.sort_indices()
    return out


def canonical_reorder(chain: SparseChain, layout: PartitionLayout) -> Tuple[np.ndarray, SparseChain, PartitionLayout]:
    """返回 (perm, 重排后的链, 分区)，perm[新编号] = 旧编号"""
    src, dst, _ = chain.arcs()
    perm = _canonical_permutation(src, dst, layout)
    if np.array_equal(perm, np.arange(layout.n_states)):
        return perm, chain, layout
    logger.debug(f"规范重排 | 移动状态数: {int(np.sum(perm != np.arange(perm.size)))}")
    return perm, SparseChain(_permute_matrix(chain.P, perm), chain.rewards[perm]), layout


def canonical_reorder_model(model: MdpModel) -> Tuple[np.ndarray, MdpModel]:
    """以所有动作支撑的并集求一个共同的规范排列并作用于每个动作"""
    union = model.transitions[0].copy()
    for P in model.transitions[1:]:
        union = union + P
    union = sp.csr_matrix(union)
    union.sort_indices()
    src = np.repeat(np.arange(model.n_states), np.diff(union.indptr))
    perm = _canonical_permutation(src, union.indices, model.layout)
    if np.array_equal(perm, np.arange(model.n_states)):
        return perm, model
    mats = tuple(_permute_matrix(P, perm) for P in model.transitions)
    return perm, MdpModel(mats, model.rewards[perm], model.layout)
