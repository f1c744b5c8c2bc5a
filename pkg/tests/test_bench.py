# -*- coding: utf-8 -*-
import numpy as np
import pytest

from bench import (ALGORITHMS, BenchRecord, BenchSpec, ComparisonReport, compare_solvers, default_algorithms,
                   flag_fastest, run_bench)
from errors import BenchSpecError, DimensionError
from generator import fixture_fig1b
from mdp_core import MdpModel, PartitionLayout, StructureReport
from parallel_runner import ParallelRunner
from policy_eval import EvalCriterion

AVERAGE = EvalCriterion.average()


# ---- BenchSpec ----

def test_default_algorithms_match_criterion():
    for criterion in ('average', 'discounted'):
        names = default_algorithms(criterion)
        assert names
        assert all(ALGORITHMS[name].criterion == criterion for name in names)


@pytest.mark.parametrize('kwargs', [
    dict(grid=((1, 10, 3),), algorithms=('RVI',)),
    dict(grid=(), algorithms=('RVI',)),
    dict(grid=((1, 10, 2),), algorithms=()),
    dict(grid=((1, 10, 2),), algorithms=('Nope',)),
    dict(grid=((1, 10, 2),), algorithms=('VI',)),
    dict(grid=((1, 10, 2),), algorithms=('VI',), criterion='discounted', gamma=1.0),
    dict(grid=((1, 10, 2),), algorithms=('RVI',), seeds=()),
    dict(grid=((1, 10, 2),), algorithms=('RVI',), time_budget_s=-1.0),
    dict(grid=((0, 10, 2),), algorithms=('RVI',)),
])
def test_bench_spec_validation(kwargs):
    with pytest.raises(BenchSpecError):
        BenchSpec(**kwargs).validate()


# ---- run_bench ----

def test_run_bench_average_records_and_agreement():
    spec = BenchSpec(grid=((1, 12, 3), (2, 12, 4)), algorithms=default_algorithms('average'), seeds=(0, 1))
    records = run_bench(spec, max_workers=1, progress=False)
    assert len(records) == 2 * 2 * len(spec.algorithms)
    assert [r.algorithm for r in records[:len(spec.algorithms)]] == list(spec.algorithms)
    assert all(r.error is None for r in records)

    by_key = {}
    for rec in records:
        by_key.setdefault(rec.grid_key, []).append(rec)
    assert len(by_key) == 4
    for group in by_key.values():
        assert sum(r.fastest for r in group) == 1
        exact = {r.algorithm: r.rho for r in group if r.algorithm != 'RVI'}
        reference = exact['RPI+GJ']
        for name, rho in exact.items():
            assert rho == pytest.approx(reference, abs=1e-8), name
        assert len({r.total_intra_arcs for r in group}) == 1


def test_run_bench_discounted_has_no_rho():
    spec = BenchSpec(grid=((2, 10, 2),), algorithms=default_algorithms('discounted'), criterion='discounted',
                     gamma=0.8)
    records = run_bench(spec, max_workers=1, progress=False)
    assert all(r.rho is None for r in records)
    assert all(r.converged for r in records)
    v_means = [r.v_mean for r in records]
    assert max(v_means) - min(v_means) < 1e-6


def test_run_bench_is_deterministic_apart_from_timing():
    spec = BenchSpec(grid=((1, 10, 2),), algorithms=('MRPI+Chiu+RB', 'RPI+GJ'), seeds=(3,))
    first = run_bench(spec, max_workers=1, progress=False)
    second = run_bench(spec, max_workers=1, progress=False)
    assert [(r.rho, r.iterations, r.v_mean) for r in first] == [(r.rho, r.iterations, r.v_mean) for r in second]


@pytest.mark.parametrize('criterion', ['average', 'discounted'])
def test_policy_iteration_family_shares_iteration_count(criterion):
    names = tuple(name for name, info in ALGORITHMS.items() if info.criterion == criterion and info.kind == 'pi')
    spec = BenchSpec(grid=((3, 24, 4),), algorithms=names, criterion=criterion, epsilon=1e-13, seeds=(0, 1, 2))
    records = run_bench(spec, max_workers=1, progress=False)
    by_key = {}
    for rec in records:
        by_key.setdefault(rec.grid_key, set()).add(rec.iterations)
    assert len(by_key) == 3
    assert all(len(counts) == 1 for counts in by_key.values())


def test_zero_budget_marks_records_over_budget():
    spec = BenchSpec(grid=((1, 10, 2),), algorithms=('MRPI+Chiu+RB', 'RVI'), time_budget_s=0.0)
    records = run_bench(spec, max_workers=1, progress=False)
    assert all(r.over_budget for r in records)
    assert all(r.stop_reason == 'budget' for r in records)
    assert not any(r.fastest for r in records)


def test_flag_fastest_ignores_unconverged():
    base = dict(criterion='average', actions=1, states=10, partitions=2, seed=0, rho=None,
                stop_reason='span', total_intra_arcs=5)
    records = [
        BenchRecord(algorithm='a', wall_time_s=0.1, iterations=1, converged=False, **base),
        BenchRecord(algorithm='b', wall_time_s=0.3, iterations=1, converged=True, **base),
        BenchRecord(algorithm='c', wall_time_s=0.2, iterations=1, converged=True, **base),
    ]
    flag_fastest(records)
    assert [r.fastest for r in records] == [False, False, True]


def test_parallel_runner_preserves_order():
    runner = ParallelRunner(max_workers=2, progress=False)
    assert runner.run(abs, [-1, -2, -3, 4, -5]) == [1, 2, 3, 4, 5]
    assert runner.run(abs, []) == []


# ---- compare_solvers ----

def test_compare_f1_passes(f1):
    model, layout = f1
    report = compare_solvers(model, layout, AVERAGE)
    assert report.validated
    assert not report.reordered
    assert report.passed()
    names = [name for name, _ in report.gaps]
    assert 'ρ Chiu vs direct' in names


def test_compare_fig1b_reorders(fig1b):
    model, layout = fig1b
    report = compare_solvers(model, layout, EvalCriterion.discounted(0.9))
    assert report.reordered
    assert report.passed()
    assert 'ρ Chiu vs direct' not in [name for name, _ in report.gaps]


def test_compare_reports_structure_failure():
    model, layout = fixture_fig1b(with_red_arcs=True)
    report = compare_solvers(model, layout, AVERAGE)
    assert not report.validated
    assert report.gaps == []
    assert not report.passed()


def test_compare_rejects_large_models():
    n = 2002
    P = np.zeros((n, n))
    P[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    model = MdpModel((P,), np.zeros((n, 1)), PartitionLayout(np.array([0, n])))
    with pytest.raises(DimensionError):
        compare_solvers(model, model.layout, AVERAGE)


def test_comparison_default_tolerance_is_strict():
    report = ComparisonReport(structure=StructureReport(stochastic_ok=True, worst_row_deficit=0.0),
                              criterion='average', gaps=[('V structured vs direct', 1e-9)])
    assert not report.passed()
    assert report.passed(tol=1e-8)
    report.gaps = [('V structured vs direct', 5e-11)]
    assert report.passed()
