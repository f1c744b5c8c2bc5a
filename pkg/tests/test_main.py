# -*- coding: utf-8 -*-
import json

import numpy as np
import pandas as pd
import pytest

from data_loader import save_model
from generator import fixture_f1, fixture_fig1b
from main import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, main
from mdp_core import MdpModel, PartitionLayout
from report import CSV_COLUMNS


@pytest.fixture
def generated_model(tmp_path):
    path = tmp_path / 'model.json'
    assert main(['generate', '--states', '12', '--partitions', '3', '--actions', '2', '--seed', '1',
                 '--out', str(path)]) == EXIT_OK
    return path


def test_generate_writes_model(generated_model):
    assert generated_model.exists()
    assert b'"partition_boundaries": [0, 4, 8, 12]' in generated_model.read_bytes()


def test_validate_accepts_generated(generated_model):
    assert main(['validate', str(generated_model)]) == EXIT_OK


def test_validate_rejects_red_arcs(tmp_path):
    model, _ = fixture_fig1b(with_red_arcs=True)
    path = save_model(model, tmp_path / 'red.json')
    assert main(['validate', str(path)]) == EXIT_VALIDATION


def test_validate_truncated_file(tmp_path, generated_model):
    data = generated_model.read_bytes()
    path = tmp_path / 'truncated.json'
    path.write_bytes(data[:len(data) // 2])
    assert main(['validate', str(path)]) == EXIT_VALIDATION


@pytest.mark.parametrize('corrupt', ['ragged', 'binary'])
def test_validate_malformed_file(tmp_path, generated_model, corrupt):
    path = tmp_path / 'bad.json'
    if corrupt == 'ragged':
        doc = json.loads(generated_model.read_bytes())
        doc['transitions'][0][0] = [0, 1]
        path.write_text(json.dumps(doc), encoding='utf-8')
    else:
        path.write_bytes(b'\xff\xfe' + generated_model.read_bytes())
    assert main(['validate', str(path)]) == EXIT_VALIDATION


def test_missing_file_is_validation_failure(tmp_path):
    assert main(['validate', str(tmp_path / 'absent.json')]) == EXIT_VALIDATION


def test_solve_writes_policy_and_values(tmp_path):
    model, _ = fixture_f1()
    path = save_model(model, tmp_path / 'f1.json')
    out = tmp_path / 'solution.csv'
    assert main(['solve', str(path), '--out', str(out)]) == EXIT_OK
    df = pd.read_csv(out)
    assert list(df.columns) == ['state', 'action', 'value']
    assert df['value'].tolist() == pytest.approx([0.0, -34 / 49, 20 / 49, -36 / 49], abs=1e-12)


@pytest.mark.parametrize('algorithm', ['MRPI+Chiu+GTH', 'RPI+GJ', 'RPI+FP', 'RVI'])
def test_solve_average_algorithms(generated_model, algorithm):
    assert main(['solve', str(generated_model), '--algorithms', algorithm]) == EXIT_OK


@pytest.mark.parametrize('algorithm', ['MRPI+Chiu+RB', 'MRPI+Chiu+GTH', 'RPI+GJ', 'RPI+FP'])
def test_solve_non_canonical_model(tmp_path, algorithm):
    model, _ = fixture_fig1b()
    path = save_model(model, tmp_path / 'fig1b.json')
    out = tmp_path / 'solution.csv'
    assert main(['solve', str(path), '--algorithms', algorithm, '--out', str(out)]) == EXIT_OK
    assert len(pd.read_csv(out)) == 14


@pytest.mark.parametrize('algorithm', ['MPI+Chiu+RB', 'PI+GJ', 'VI'])
def test_solve_discounted_algorithms(generated_model, algorithm):
    args = ['solve', str(generated_model), '--criterion', 'discounted', '--gamma', '0.9', '--algorithms', algorithm]
    assert main(args) == EXIT_OK


def test_solve_rejects_mismatched_algorithm(generated_model):
    assert main(['solve', str(generated_model), '--algorithms', 'VI']) == EXIT_VALIDATION


def test_solve_rejects_gamma_out_of_range(generated_model):
    args = ['solve', str(generated_model), '--criterion', 'discounted', '--gamma', '1.0']
    assert main(args) == EXIT_VALIDATION


def test_solve_max_iter_reached_is_solver_failure(tmp_path):
    model, _ = fixture_f1()
    path = save_model(model, tmp_path / 'f1.json')
    assert main(['solve', str(path), '--algorithms', 'RVI', '--max-iter', '2']) == EXIT_SOLVER


def test_bench_csv_to_file(tmp_path):
    out = tmp_path / 'bench.csv'
    args = ['bench', '--states', '12', '--partitions', '2', '3', '--seed', '0', '1',
            '--algorithms', 'MRPI+Chiu+RB,RPI+GJ', '--workers', '1', '--out', str(out)]
    assert main(args) == EXIT_OK
    df = pd.read_csv(out, dtype=str, keep_default_na=False)
    assert list(df.columns) == CSV_COLUMNS
    assert len(df) == 2 * 2 * 2
    assert set(df['partitions']) == {'2', '3'}


def test_bench_markdown_to_stdout(capsys):
    args = ['bench', '--states', '10', '--partitions', '2', '--criterion', 'discounted',
            '--algorithms', 'MPI+Chiu+RB,VI', '--format', 'markdown', '--workers', '1']
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith('# SISDMDP benchmark')
    assert '## discounted | |A| = 1, N = 10' in out


def test_bench_invalid_grid(tmp_path):
    args = ['bench', '--states', '10', '--partitions', '3', '--workers', '1', '--out', str(tmp_path / 'x.csv')]
    assert main(args) == EXIT_VALIDATION


def test_compare_f1(tmp_path):
    model, _ = fixture_f1()
    path = save_model(model, tmp_path / 'f1.json')
    assert main(['compare', str(path)]) == EXIT_OK


def test_compare_structure_failure(tmp_path):
    model, _ = fixture_fig1b(with_red_arcs=True)
    path = save_model(model, tmp_path / 'red.json')
    assert main(['compare', str(path)]) == EXIT_VALIDATION


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit):
        main(['frobnicate'])


def test_solve_average_rejects_reducible_model(tmp_path):
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    model = MdpModel((P,), np.array([[1.0], [2.0]]), PartitionLayout(np.array([0, 2])))
    path = save_model(model, tmp_path / 'reducible.json')
    assert main(['solve', str(path)]) == EXIT_VALIDATION
