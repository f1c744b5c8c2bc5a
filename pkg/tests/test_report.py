# -*- coding: utf-8 -*-
import json
import math

import pytest

from bench import BenchRecord
from errors import ReportFormatError
from report import CSV_COLUMNS, emit_report, read_csv_report


def _record(algorithm, partitions, time_s, iterations, **kwargs):
    fields = dict(algorithm=algorithm, criterion='average', actions=1, states=100, partitions=partitions,
                  seed=0, wall_time_s=time_s, iterations=iterations, rho=0.5, converged=True,
                  stop_reason='policy_fixed', total_intra_arcs=321)
    fields.update(kwargs)
    return BenchRecord(**fields)


@pytest.fixture
def records():
    return [
        _record('MRPI+Chiu+RB', 2, 0.5, 3, fastest=True),
        _record('RVI', 2, 1.25, 40, stop_reason='span'),
        _record('MRPI+Chiu+RB', 4, 0.25, 4, fastest=True),
        _record('RVI', 4, 70.0, 10, rho=None, converged=False, stop_reason='budget', over_budget=True),
    ]


MARKDOWN_2X2 = """# SISDMDP benchmark

## average | |A| = 1, N = 100

| Algorithm | K=2 | K=4 |
|---|---|---|
| MRPI+Chiu+RB | **0.500 (3)** | **0.250 (4)** |
| RVI | 1.250 (40) | >budget |
"""


def test_markdown_layout(records):
    assert emit_report(records, 'markdown').decode('utf-8') == MARKDOWN_2X2


def test_markdown_error_and_missing_cells(records):
    records = records[:3] + [_record('RPI+GJ', 2, 0.1, 2, error='SingularSystemError: x')]
    text = emit_report(records, 'markdown').decode('utf-8')
    assert '| RPI+GJ | error | -- |' in text
    assert '| RVI | 1.250 (40) | -- |' in text


def test_markdown_averages_over_seeds():
    group = [_record('RVI', 2, 1.0, 10, seed=0), _record('RVI', 2, 2.0, 12, seed=1)]
    text = emit_report(group, 'markdown').decode('utf-8')
    assert '| RVI | 1.500 (10/12) |' in text


def test_csv_header_and_cells(records):
    lines = emit_report(records, 'csv').decode('utf-8').splitlines()
    assert lines[0] == ','.join(CSV_COLUMNS)
    assert lines[1] == 'MRPI+Chiu+RB,average,1,100,2,0,0.5,3,0.5,true,policy_fixed,321'
    assert lines[4] == 'RVI,average,1,100,4,0,>budget,10,,false,budget,321'
    assert len(lines) == 5


def test_csv_read_back(records):
    parsed = read_csv_report(emit_report(records, 'csv'))
    assert [r.algorithm for r in parsed] == [r.algorithm for r in records]
    assert parsed[1].wall_time_s == 1.25
    assert parsed[1].rho == 0.5
    assert math.isinf(parsed[3].wall_time_s)
    assert parsed[3].over_budget
    assert parsed[3].rho is None
    assert not parsed[3].converged


def test_csv_read_rejects_missing_columns():
    with pytest.raises(ReportFormatError, match='rho'):
        read_csv_report('algorithm,criterion\nRVI,average\n')


def test_json_lines(records):
    lines = emit_report(records, 'json-lines').decode('utf-8').splitlines()
    assert len(lines) == 4
    docs = [json.loads(line) for line in lines]
    assert docs[0]['algorithm'] == 'MRPI+Chiu+RB'
    assert docs[0]['time_s'] == 0.5
    assert docs[3]['time_s'] == '>budget'
    assert docs[3]['rho'] is None


def test_xlsx_is_zip_container(records):
    payload = emit_report(records, 'xlsx')
    assert payload[:2] == b'PK'


def test_unknown_format_rejected(records):
    with pytest.raises(ReportFormatError):
        emit_report(records, 'html')


def test_csv_read_back_reemits_identical_bytes(records):
    records[0].wall_time_s = 0.1 + 0.2
    payload = emit_report(records, 'csv')
    parsed = read_csv_report(payload)
    assert parsed[0].wall_time_s == 0.1 + 0.2
    assert math.isinf(parsed[3].wall_time_s) and parsed[3].over_budget
    assert emit_report(parsed, 'csv') == payload
