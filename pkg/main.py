# -*- coding: utf-8 -*-
"""
SISDMDP 求解器命令行入口

子命令: generate / validate / solve / bench / compare
退出码: 0 成功，1 输入校验失败，2 求解失败
"""
import argparse
import itertools
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from bench import ALGORITHMS, BenchSpec, compare_solvers, default_algorithms, run_bench
from config import BENCH_CONFIG, FILE_PATHS, GENERATOR_CONFIG, STOPPING_CONFIG
from data_loader import load_model, save_bytes, save_model, save_output
from dp_algorithms import policy_iteration, relative_value_iteration, value_iteration
from errors import IrreducibilityError, ModelValidationError, SolverError
from generator import GeneratorConfig, generate_sisdmdp, instance_stats
from mdp_core import validate_model
from policy_eval import EvalCriterion
from performance_monitor import PerformanceMonitor
from report import REPORT_FORMATS, emit_report
from utils import setup_logger

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2


def _add_criterion_args(parser: argparse.ArgumentParser):
    parser.add_argument('--criterion', choices=('average', 'discounted'), default='average')
    parser.add_argument('--gamma', type=float, default=BENCH_CONFIG['gamma'], help='折扣因子（仅折扣准则）')
    parser.add_argument('--epsilon', type=float, default=STOPPING_CONFIG['epsilon'])
    parser.add_argument('--max-iter', type=int, default=None)
    parser.add_argument('--budget-s', type=float, default=None, help='单次运行的时间预算（秒）')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='sisdmdp', description='单入口超状态可分解 MDP 求解与基准测试')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', help='生成随机实例')
    p.add_argument('--states', type=int, required=True)
    p.add_argument('--partitions', type=int, required=True)
    p.add_argument('--actions', type=int, default=1)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--perturb', type=float, default=GENERATOR_CONFIG['perturb_magnitude'])
    p.add_argument('--out', type=Path, default=None)

    p = sub.add_parser('validate', help='校验模型结构')
    p.add_argument('model', type=Path)

    p = sub.add_parser('solve', help='求解模型')
    p.add_argument('model', type=Path)
    _add_criterion_args(p)
    p.add_argument('--algorithms', default=None, help='算法名（默认按准则选择结构化策略迭代）')
    p.add_argument('--out', type=Path, default=None, help='输出每个状态的策略与值（CSV）')

    p = sub.add_parser('bench', help='运行基准测试网格')
    _add_criterion_args(p)
    p.add_argument('--states', type=int, nargs='+', required=True)
    p.add_argument('--partitions', type=int, nargs='+', required=True)
    p.add_argument('--actions', type=int, nargs='+', default=[1])
    p.add_argument('--seed', type=int, nargs='+', default=[0])
    p.add_argument('--algorithms', default=None, help='逗号分隔的算法列表')
    p.add_argument('--format', choices=REPORT_FORMATS, default='csv')
    p.add_argument('--out', type=Path, default=None)
    p.add_argument('--workers', type=int, default=None, help='并行进程数（默认读取 SISDMDP_THREADS）')

    p = sub.add_parser('compare', help='对比结构化求解与稠密基准')
    p.add_argument('model', type=Path)
    _add_criterion_args(p)
    return parser


def _criterion(args) -> EvalCriterion:
    return EvalCriterion.average() if args.criterion == 'average' else EvalCriterion.discounted(args.gamma)


def cmd_generate(args, logger: logging.Logger) -> int:
    config = GeneratorConfig(args.states, args.partitions, args.actions, args.seed, perturb_magnitude=args.perturb)
    model, layout = generate_sisdmdp(config)
    out = args.out or FILE_PATHS['output_dir'] / f"model_N{args.states}_K{args.partitions}_A{args.actions}_s{args.seed}.json"
    path = save_model(model, out)
    stats = instance_stats(model, layout)
    logger.info(f"✅ 实例已生成: {path}")
    logger.info(f"  📊 分区内弧数: {stats.total_intra_arcs:,} | 跨分区弧数: {stats.cross_arcs:,} | 密度: {stats.density:.2e}")
    return EXIT_OK


def cmd_validate(args, logger: logging.Logger) -> int:
    model, _ = load_model(args.model)
    reports = validate_model(model)
    failed = False
    for a, report in enumerate(reports):
        logger.info(f"动作 {a}: {report.summary()}")
        if not report.canonical_order_ok:
            logger.warning(f"⚠️ 动作 {a} 不满足规范序，求解前将自动重排: {report.canonical_violations[:5]}")
        if not report.ok:
            failed = True
            if report.single_input_violations:
                logger.error(f"❌ 单入口违规弧: {report.single_input_violations[:5]}")
            if report.single_cycle_violations:
                logger.error(f"❌ 不经过根的环: {report.single_cycle_violations[:3]}")
            if not report.stochastic_ok:
                logger.error(f"❌ 行随机性偏差: {report.worst_row_deficit:.3e}")
            if not report.irreducible:
                logger.error("❌ 链可约")
    if failed:
        logger.error("❌ 模型校验未通过")
        return EXIT_VALIDATION
    logger.info("✅ 模型校验通过")
    return EXIT_OK


def cmd_solve(args, logger: logging.Logger) -> int:
    model, _ = load_model(args.model)
    name = args.algorithms or default_algorithms(args.criterion)[0]
    if name not in ALGORITHMS or ALGORITHMS[name].criterion != args.criterion:
        raise ModelValidationError(f"算法 {name} 不适用于 {args.criterion} 准则")
    criterion = _criterion(args)
    if criterion.is_average:
        reducible = [a for a, report in enumerate(validate_model(model)) if not report.irreducible]
        if reducible:
            raise IrreducibilityError(f"平均准则要求链不可约，动作 {reducible} 诱导的链可约")

    info = ALGORITHMS[name]
    if info.kind == 'pi':
        policy, result, stats = policy_iteration(model, criterion, info.evaluator, max_iter=args.max_iter,
                                                 epsilon=args.epsilon, time_budget_s=args.budget_s)
        V, rho = result.V, result.rho
    elif info.kind == 'vi':
        policy, V, stats = value_iteration(model, args.gamma, args.epsilon, args.max_iter, time_budget_s=args.budget_s)
        rho = None
    else:
        policy, V, rho, stats = relative_value_iteration(model, args.epsilon, args.max_iter, time_budget_s=args.budget_s)

    logger.info(f"🎯 {name} | {criterion} | 迭代: {stats.iterations} | 停止原因: {stats.stop_reason}")
    logger.info(f"  ⏱️  总耗时: {stats.wall_time_s:.3f}s | 评估: {stats.eval_time_s:.3f}s | 改进: {stats.improve_time_s:.3f}s")
    if rho is not None:
        logger.info(f"  📈 平均回报 ρ = {rho:.15g}")
    if args.out is not None:
        df = pd.DataFrame({'state': range(model.n_states), 'action': policy.actions, 'value': V})
        save_output(lambda p: df.to_csv(p, index=False), args.out)
    return EXIT_OK if stats.converged else EXIT_SOLVER


def cmd_bench(args, logger: logging.Logger) -> int:
    algorithms = tuple(a.strip() for a in args.algorithms.split(',')) if args.algorithms \
        else default_algorithms(args.criterion)
    grid = tuple(itertools.product(args.actions, args.states, args.partitions))
    spec = BenchSpec(grid=grid, algorithms=algorithms, criterion=args.criterion, gamma=args.gamma,
                     epsilon=args.epsilon, max_iter=args.max_iter, seeds=tuple(args.seed),
                     time_budget_s=args.budget_s if args.budget_s is not None else BENCH_CONFIG['time_budget_s'])
    records = run_bench(spec, max_workers=args.workers, progress=BENCH_CONFIG['progress'] and sys.stderr.isatty())
    payload = emit_report(records, args.format)
    if args.out is not None:
        path = save_bytes(payload, args.out)
        logger.info(f"📄 报告已写入: {path}")
    elif args.format == 'xlsx':
        path = save_bytes(payload, FILE_PATHS['output_dir'] / 'bench_report.xlsx')
        logger.info(f"📄 报告已写入: {path}")
    else:
        sys.stdout.write(payload.decode('utf-8'))
    return EXIT_OK


def cmd_compare(args, logger: logging.Logger) -> int:
    model, layout = load_model(args.model)
    report = compare_solvers(model, layout, _criterion(args))
    for line in report.lines():
        logger.info(line)
    if not report.validated:
        return EXIT_VALIDATION
    return EXIT_OK if report.passed() else EXIT_SOLVER


COMMANDS = {
    'generate': cmd_generate,
    'validate': cmd_validate,
    'solve': cmd_solve,
    'bench': cmd_bench,
    'compare': cmd_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)
    logger = setup_logger()
    logger.info(f"🚀 程序启动：SISDMDP {args.command}")

    try:
        with PerformanceMonitor(args.command):
            return COMMANDS[args.command](args, logger)
    except KeyboardInterrupt:
        logger.info("⚠️  用户中断程序执行")
        return EXIT_VALIDATION
    except ModelValidationError as e:
        logger.error(f"❌ 输入校验失败: {e}")
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        logger.error(f"❌ 文件未找到: {e}")
        return EXIT_VALIDATION
    except SolverError as e:
        logger.error(f"❌ 求解失败: {e}")
        return EXIT_SOLVER
    except Exception as e:
        logger.critical(f"💥 系统错误: {e}", exc_info=True)
        return EXIT_SOLVER
    finally:
        logger.info("🔚 程序结束")


if __name__ == "__main__":
    sys.exit(main())
