# -*- coding: utf-8 -*-
"""
配置管理模块
"""
import os
from pathlib import Path


def get_project_root() -> Path:
    """获取项目根目录"""
    current_path = Path(__file__).resolve().parent
    max_depth = 10  # 最大查找深度

    for _ in range(max_depth):
        # 检查是否为项目根目录（包含关键文件）
        if (current_path / "main.py").exists() or \
           (current_path / "requirements.txt").exists():
            return current_path
        if current_path == current_path.parent:  # 到达文件系统根目录
            break
        current_path = current_path.parent

    return Path(__file__).resolve().parent


# 项目根目录
PROJECT_ROOT = get_project_root()

# 标准化目录结构
DIRECTORIES = {
    'output': PROJECT_ROOT / "output_files",
    'logs': PROJECT_ROOT / "logs",
}

# 文件路径配置
FILE_PATHS = {
    'project_root': PROJECT_ROOT,
    'output_dir': DIRECTORIES['output'],
    'log_dir': DIRECTORIES['logs'],
    'log_file': DIRECTORIES['logs'] / 'sisdmdp.log',
}


def ensure_directories():
    """确保输出与日志目录存在"""
    for dir_path in DIRECTORIES.values():
        try:
            dir_path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            print(f"⚠️  创建目录失败 {dir_path}: {e}")


# 数值容差配置
SOLVER_CONFIG = {
    'stochastic_tol': 1e-12,       # 行和偏差
    'absorbing_tol': 1e-12,        # d(s) = 1 - P(s,s) 下限
    'steady_state_tol': 1e-10,     # 求解器对比中各项差值的上限
    'renorm_warn_tol': 1e-12,      # Π 末尾重新归一化的告警阈值
    'pivot_rel_tol': 1e-13,        # 主元相对阈值
    'consistency_tol': 1e-8,       # 参考方程残差
    'residual_tol': 1e-9,          # Bellman 残差
    'tie_tol': 1e-12,              # 策略改进平局容差
    'q_table_max_entries': 10**8,  # 超过 |A|·N 时逐动作流式求 argmax
}

# 迭代停止准则
STOPPING_CONFIG = {
    'epsilon': 1e-15,
    'max_iter': 100000,
    'stagnation_window': 100,
    'stagnation_threshold': 1e-13,
    'pi_max_iter': 10000,
}

# 随机实例生成器默认参数
GENERATOR_CONFIG = {
    'forward_arc_rate': 3.0,
    'backward_to_root_prob': 0.5,
    'cross_arc_rate': 2.0,
    'superstate_extra_rate': 1.0,
    'perturb_magnitude': 0.2,
    'reward_range': (0.0, 10.0),
    'self_loop_prob': 0.1,
    'min_weight': 0.05,
}

# 基准测试配置
BENCH_CONFIG = {
    'gamma': 0.9,
    'time_budget_s': 60.0,
    'average_algorithms': ['MRPI+Chiu+RB', 'MRPI+Chiu+GTH', 'RPI+FP', 'RPI+GJ', 'RVI'],
    'discounted_algorithms': ['MPI+Chiu+RB', 'PI+FP', 'PI+GJ', 'VI'],
    'progress': True,
    'compare_max_states': 2000,
}


def _resolve_max_workers() -> int:
    """从环境变量 SISDMDP_THREADS 读取并行上限（0 = 自动）"""
    auto = max(1, (os.cpu_count() or 2) - 1)  # 保留一个CPU核心
    raw = os.environ.get('SISDMDP_THREADS', '').strip()
    if not raw:
        return auto
    try:
        value = int(raw)
    except ValueError:
        return auto
    return auto if value <= 0 else value


# 性能优化配置
PERFORMANCE_CONFIG = {
    'use_parallel': True,
    'max_workers': _resolve_max_workers(),
    'serial_threshold': 2,   # 任务数不超过该值时串行执行
}
