# -*- coding: utf-8 -*-
"""
模型文件读写模块

模型格式为单个自描述 JSON 文档：
  header       {n_states, n_actions, K, partition_boundaries}
  transitions  每个动作一个 [源, 目标, 概率] 三元组列表，每行一个三元组
  rewards      n_states × n_actions 稠密数组
浮点数以最短可精确往返的十进制形式写出。
"""
import json
import logging
import shutil
import time
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np

from config import FILE_PATHS
from errors import ModelFormatError
from mdp_core import MdpModel, PartitionLayout, triplets_to_csr

logger = logging.getLogger('SISDMDP.DataLoader')

SECTIONS = ('header', 'transitions', 'rewards')
HEADER_KEYS = ('n_states', 'n_actions', 'K', 'partition_boundaries')


def _num(x: float) -> str:
    return json.dumps(float(x))


def serialize_model(model: MdpModel, layout: PartitionLayout = None) -> bytes:
    """序列化为 UTF-8 JSON（同一模型总是得到相同字节）"""
    layout = model.layout if layout is None else layout
    header = {
        'n_states': model.n_states,
        'n_actions': model.n_actions,
        'K': layout.K,
        'partition_boundaries': [int(b) for b in layout.boundaries],
    }
    lines = ['{', f'  "header": {json.dumps(header)},', '  "transitions": [']
    for a, P in enumerate(model.transitions):
        src = np.repeat(np.arange(model.n_states), np.diff(P.indptr))
        triplets = [f'      [{int(s)}, {int(t)}, {_num(p)}]' for s, t, p in zip(src, P.indices, P.data)]
        closing = '    ]' if a == model.n_actions - 1 else '    ],'
        lines.append('    [')
        lines.append(',\n'.join(triplets))
        lines.append(closing)
    lines.append('  ],')
    lines.append('  "rewards": [')
    rows = ['    [' + ', '.join(_num(x) for x in row) + ']' for row in model.rewards]
    lines.append(',\n'.join(rows))
    lines.append('  ]')
    lines.append('}')
    return ('\n'.join(line for line in lines if line) + '\n').encode('utf-8')


def _missing_sections(text: str):
    return [name for name in SECTIONS if f'"{name}"' not in text]


def parse_model(data: Union[bytes, str]) -> Tuple[MdpModel, PartitionLayout]:
    """解析 JSON 模型并重新检查全部不变量"""
    try:
        text = data.decode('utf-8') if isinstance(data, (bytes, bytearray)) else data
    except UnicodeDecodeError as e:
        raise ModelFormatError(f"模型文件不是合法的 UTF-8 文本（字节偏移 {e.start}）") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        missing = _missing_sections(text)
        if missing:
            raise ModelFormatError(f"模型文件不完整，缺少: {', '.join(missing)}") from e
        raise ModelFormatError(f"模型文件 JSON 语法错误（第 {e.lineno} 行第 {e.colno} 列）: {e.msg}") from e

    if not isinstance(doc, dict):
        raise ModelFormatError("模型文件顶层必须是 JSON 对象")
    missing = [name for name in SECTIONS if name not in doc]
    if missing:
        raise ModelFormatError(f"模型文件缺少: {', '.join(missing)}")

    header = doc['header']
    absent = [key for key in HEADER_KEYS if key not in header]
    if absent:
        raise ModelFormatError(f"header 缺少字段: {', '.join(absent)}")

    try:
        n = int(header['n_states'])
        n_actions, K = int(header['n_actions']), int(header['K'])
        boundaries = np.asarray(header['partition_boundaries'], dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"header 字段类型错误: {e}") from e
    layout = PartitionLayout(boundaries)
    if layout.n_states != n or layout.K != K:
        raise ModelFormatError(f"header 不一致: n_states={n}, K={K}, 边界={header['partition_boundaries']}")
    if not isinstance(doc['transitions'], list) or len(doc['transitions']) != n_actions:
        raise ModelFormatError(f"transitions 的动作数与 header 声明的 {n_actions} 不一致")

    mats = []
    for a, triplets in enumerate(doc['transitions']):
        try:
            arr = np.asarray(triplets, dtype=float)
        except (TypeError, ValueError) as e:
            raise ModelFormatError(f"transitions 动作 {a} 的三元组格式错误: {e}") from e
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ModelFormatError(f"transitions 动作 {a} 的每一项必须是 [源, 目标, 概率]")
        src, dst = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
        if np.any(src != arr[:, 0]) or np.any(dst != arr[:, 1]):
            raise ModelFormatError(f"动作 {a} 的状态编号必须为整数")
        mats.append(triplets_to_csr(src, dst, arr[:, 2], n))

    try:
        rewards = np.asarray(doc['rewards'], dtype=float)
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"rewards 格式错误: {e}") from e
    model = MdpModel(tuple(mats), rewards, layout)
    return model, layout


def create_backup_with_retry(original_path: Path, backup_path: Path, max_retries: int = 3) -> Optional[Path]:
    """带重试机制的备份创建"""
    for attempt in range(max_retries):
        try:
            shutil.copy2(str(original_path), str(backup_path))
            logger.info(f"💾 已创建备份文件: {backup_path.name}")
            return backup_path
        except PermissionError:
            if attempt < max_retries - 1:
                logger.warning(f"⚠️ 备份创建失败，{2 ** attempt}秒后重试... (尝试 {attempt + 1}/{max_retries})")
                time.sleep(2 ** attempt)  # 指数退避
            else:
                logger.error("❌ 备份创建失败: 无法访问原文件")
                return None
        except OSError as e:
            logger.error(f"❌ 备份创建异常: {e}")
            return None
    return None


def save_with_retry(writer: Callable[[Path], None], file_path: Path, max_retries: int = 3):
    """带重试机制的文件保存，writer 负责把内容写到给定路径"""
    for attempt in range(max_retries):
        try:
            writer(file_path)
            return
        except PermissionError:
            if attempt < max_retries - 1:
                wait_time = 2 ** attempt
                logger.warning(f"⚠️ 文件保存失败，{wait_time}秒后重试... (尝试 {attempt + 1}/{max_retries})")
                time.sleep(wait_time)
            else:
                logger.error("❌ 文件保存失败: 权限被拒绝")
                raise


def alternative_save(writer: Callable[[Path], None], original_path: Path) -> Optional[Path]:
    """替代保存方案：写入 output 目录下带时间戳的新文件"""
    try:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        output_dir = Path(FILE_PATHS['output_dir'])
        output_dir.mkdir(parents=True, exist_ok=True)
        alt_path = output_dir / f"{original_path.stem}_{timestamp}{original_path.suffix}"
        writer(alt_path)
        logger.info(f"💡 文件已保存到替代位置: {alt_path}")
        return alt_path
    except OSError as e:
        logger.error(f"❌ 替代保存方案也失败: {e}")
        return None


def save_output(writer: Callable[[Path], None], file_path: Union[str, Path], backup: bool = True) -> Path:
    """保存文件：已存在时先备份，失败时重试，仍失败则写到替代位置"""
    output_path = Path(file_path)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        backup_path = None
        if backup and output_path.exists():
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            backup_path = output_path.parent / f"{output_path.stem}_backup_{timestamp}{output_path.suffix}"
            backup_path = create_backup_with_retry(output_path, backup_path)

        save_with_retry(writer, output_path)
        logger.info(f"✅ 文件保存完成: {output_path.name}")
        if backup_path and backup_path.exists():
            logger.info(f"   📎 原文件已备份: {backup_path.name}")
        return output_path
    except OSError as e:
        logger.error(f"❌ 保存文件失败: {e}")
        alt_path = alternative_save(writer, output_path)
        if alt_path is None:
            raise
        return alt_path


def save_bytes(payload: bytes, file_path: Union[str, Path], backup: bool = True) -> Path:
    return save_output(lambda p: Path(p).write_bytes(payload), file_path, backup)


def save_model(model: MdpModel, file_path: Union[str, Path], backup: bool = True) -> Path:
    """保存模型，返回实际写入的路径"""
    return save_bytes(serialize_model(model), file_path, backup)


def load_model(file_path: Union[str, Path]) -> Tuple[MdpModel, PartitionLayout]:
    """读取模型文件"""
    path = Path(file_path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        logger.error(f"❌ 文件未找到: {path}")
        raise
    model, layout = parse_model(data)
    logger.info(f"✅ 模型加载完成 | N={model.n_states} K={layout.K} |A|={model.n_actions}")
    return model, layout
