# -*- coding: utf-8 -*-
"""
工具函数模块
"""
import logging

from config import FILE_PATHS, PERFORMANCE_CONFIG, ensure_directories


def setup_logger() -> logging.Logger:
    """配置日志系统"""
    logger = logging.getLogger('SISDMDP')
    logger.setLevel(logging.DEBUG)

    # 避免重复添加handler
    if logger.handlers:
        return logger

    ensure_directories()

    # 日志格式
    formatter = logging.Formatter(
        '%(asctime)s | %(levelname)-8s | [%(name)s.%(funcName)s] %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # 文件处理器
    try:
        file_handler = logging.FileHandler(FILE_PATHS['log_file'], encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    except OSError as e:
        print(f"⚠️  无法写入日志文件 {FILE_PATHS['log_file']}: {e}")

    # 控制台处理器
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    return logger


def resolve_workers(requested: int = None) -> int:
    """确定并行工作进程数（None 或 0 表示使用配置值）"""
    if requested is None or requested <= 0:
        return PERFORMANCE_CONFIG['max_workers']
    return requested
