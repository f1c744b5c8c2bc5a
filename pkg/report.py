# -*- coding: utf-8 -*-
"""
基准测试报告输出：csv / markdown / json-lines / xlsx，以及 CSV 读回
"""
import io
import json
import logging
import math
from dataclasses import asdict
from typing import Dict, List, Sequence, Union

import pandas as pd

from bench import BenchRecord
from errors import ReportFormatError

logger = logging.getLogger('SISDMDP.Report')

REPORT_FORMATS = ('csv', 'markdown', 'json-lines', 'xlsx')
CSV_COLUMNS = ['algorithm', 'criterion', 'actions', 'states', 'partitions', 'seed', 'time_s',
               'iterations', 'rho', 'converged', 'stop_reason', 'total_intra_arcs']
OVER_BUDGET = '>budget'


def _time_cell(rec: BenchRecord) -> str:
    return OVER_BUDGET if rec.over_budget else repr(float(rec.wall_time_s))


def _csv_row(rec: BenchRecord) -> Dict[str, str]:
    return {
        'algorithm': rec.algorithm,
        'criterion': rec.criterion,
        'actions': str(rec.actions),
        'states': str(rec.states),
        'partitions': str(rec.partitions),
        'seed': str(rec.seed),
        'time_s': _time_cell(rec),
        'iterations': str(rec.iterations),
        'rho': '' if rec.rho is None else repr(float(rec.rho)),
        'converged': 'true' if rec.converged else 'false',
        'stop_reason': rec.stop_reason,
        'total_intra_arcs': str(rec.total_intra_arcs),
    }


def _to_csv(records: Sequence[BenchRecord]) -> bytes:
    df = pd.DataFrame([_csv_row(r) for r in records], columns=CSV_COLUMNS, dtype=str)
    return df.to_csv(index=False, lineterminator='\n').encode('utf-8')


def _md_cell(group: List[BenchRecord]) -> str:
    if any(r.error is not None for r in group):
        return 'error'
    if any(r.over_budget for r in group):
        return OVER_BUDGET
    mean_time = sum(r.wall_time_s for r in group) / len(group)
    iterations = sorted({r.iterations for r in group})
    cell = f"{mean_time:.3f} ({'/'.join(str(i) for i in iterations)})"
    return f"**{cell}**" if all(r.fastest for r in group) else cell


def _to_markdown(records: Sequence[BenchRecord]) -> bytes:
    """按 (准则, |A|, N) 分表，行为算法，列为 K；单元格为耗时秒数（迭代次数），最快者加粗"""
    tables: Dict[tuple, Dict[str, Dict[int, List[BenchRecord]]]] = {}
    columns: Dict[tuple, List[int]] = {}
    for rec in records:
        key = (rec.criterion, rec.actions, rec.states)
        rows = tables.setdefault(key, {})
        cols = columns.setdefault(key, [])
        if rec.partitions not in cols:
            cols.append(rec.partitions)
        rows.setdefault(rec.algorithm, {}).setdefault(rec.partitions, []).append(rec)

    lines = ['# SISDMDP benchmark', '']
    for (criterion, actions, states), rows in tables.items():
        cols = columns[(criterion, actions, states)]
        lines.append(f"## {criterion} | |A| = {actions}, N = {states}")
        lines.append('')
        lines.append('| Algorithm | ' + ' | '.join(f"K={k}" for k in cols) + ' |')
        lines.append('|---|' + '---|' * len(cols))
        for algorithm, by_k in rows.items():
            cells = [_md_cell(by_k[k]) if k in by_k else '--' for k in cols]
            lines.append(f"| {algorithm} | " + ' | '.join(cells) + ' |')
        lines.append('')
    return '\n'.join(lines).encode('utf-8')


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _to_json_lines(records: Sequence[BenchRecord]) -> bytes:
    out = []
    for rec in records:
        doc = {k: _json_value(v) for k, v in asdict(rec).items()}
        doc['time_s'] = OVER_BUDGET if rec.over_budget else rec.wall_time_s
        out.append(json.dumps(doc, ensure_ascii=False) + '\n')
    return ''.join(out).encode('utf-8')


def _to_xlsx(records: Sequence[BenchRecord]) -> bytes:
    df = pd.DataFrame([asdict(r) for r in records], columns=list(BenchRecord.__dataclass_fields__))
    df.insert(6, 'time_s', [_time_cell(r) for r in records])
    buffer = io.BytesIO()
    with pd.ExcelWriter(buffer, engine='openpyxl') as writer:
        df.to_excel(writer, sheet_name='bench', index=False)
    return buffer.getvalue()


def emit_report(records: Sequence[BenchRecord], fmt: str = 'csv') -> bytes:
    """按格式生成报告字节流，记录顺序保持不变"""
    writers = {
        'csv': _to_csv,
        'markdown': _to_markdown,
        'json-lines': _to_json_lines,
        'xlsx': _to_xlsx,
    }
    if fmt not in writers:
        raise ReportFormatError(f"不支持的报告格式: {fmt}（可选: {', '.join(REPORT_FORMATS)}）")
    return writers[fmt](records)


def read_csv_report(data: Union[bytes, str]) -> List[BenchRecord]:
    """读回 CSV 报告

    CSV 表头固定，超预算记录的耗时单元格只有 ">budget"，读回时 wall_time_s 为 inf、over_budget 为 True；
    预算内记录的耗时以 repr 写出，读回逐位相同。读回的记录再次输出得到相同字节。
    """
    text = data.decode('utf-8') if isinstance(data, (bytes, bytearray)) else data
    df = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ReportFormatError(f"CSV 报告缺少列: {', '.join(missing)}")
    records = []
    for row in df.to_dict(orient='records'):
        over_budget = row['time_s'] == OVER_BUDGET
        records.append(BenchRecord(
            algorithm=row['algorithm'],
            criterion=row['criterion'],
            actions=int(row['actions']),
            states=int(row['states']),
            partitions=int(row['partitions']),
            seed=int(row['seed']),
            wall_time_s=math.inf if over_budget else float(row['time_s']),
            iterations=int(row['iterations']),
            rho=None if row['rho'] == '' else float(row['rho']),
            converged=row['converged'] == 'true',
            stop_reason=row['stop_reason'],
            total_intra_arcs=int(row['total_intra_arcs']),
            over_budget=over_budget,
        ))
    return records
