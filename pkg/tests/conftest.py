# -*- coding: utf-8 -*-
"""
测试公共夹具
"""
import numpy as np
import pytest

from generator import GeneratorConfig, fixture_f1, fixture_fig1b, generate_sisdmdp
from mdp_core import MdpModel, PartitionLayout, SparseChain


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='运行规模与计时相关的慢测试')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='需要 --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def f1():
    """(model, layout)，ρ = 6/7"""
    return fixture_f1()


@pytest.fixture
def f1_chain(f1):
    model, _ = f1
    return model.chain(0)


@pytest.fixture
def fig1b():
    return fixture_fig1b()


@pytest.fixture
def f1_two_actions(f1):
    """F1 的转移矩阵重复两次，只有回报不同；最优策略逐状态取较大回报"""
    model, layout = f1
    P = model.transitions[0]
    rewards = np.array([[1.0, 0.0], [0.0, 3.0], [2.0, 1.0], [0.0, 1.0]])
    return MdpModel((P, P.copy()), rewards, layout)


@pytest.fixture
def single_state_two_actions():
    """1 个状态、2 个动作，P = [[1]]，r = (1, 5)"""
    P = SparseChain.from_dense([[1.0]], [0.0]).P
    return MdpModel((P, P.copy()), np.array([[1.0, 5.0]]), PartitionLayout(np.array([0, 1])))


@pytest.fixture
def period_two_model():
    """两状态周期链 0 ↔ 1，r = (0, 2)"""
    chain = SparseChain.from_dense([[0.0, 1.0], [1.0, 0.0]], [0.0, 2.0])
    return MdpModel((chain.P,), chain.rewards.reshape(-1, 1), PartitionLayout(np.array([0, 2])))


def make_instance(n_states, n_partitions, n_actions=1, seed=0):
    return generate_sisdmdp(GeneratorConfig(n_states, n_partitions, n_actions, seed))


@pytest.fixture
def small_instance():
    return make_instance(24, 4, n_actions=2, seed=7)
