# -*- coding: utf-8 -*-
"""
异常定义模块

输入问题统一继承 ModelValidationError（命令行退出码 1），
数值求解失败统一继承 SolverError（命令行退出码 2）。
"""


class SisdmdpError(Exception):
    """项目异常基类"""


class ModelValidationError(SisdmdpError, ValueError):
    """输入模型或参数不合法"""


class DimensionError(ModelValidationError):
    """维度不一致"""


class StochasticityError(ModelValidationError):
    """转移矩阵不是行随机矩阵"""


class InvalidActionError(ModelValidationError):
    """策略中的动作编号越界"""


class StructureError(ModelValidationError):
    """违反单入口 / 单环 / 规范序结构"""


class IrreducibilityError(ModelValidationError):
    """链不可约条件不成立"""


class ConfigError(ModelValidationError):
    """生成器配置不合法"""


class BenchSpecError(ModelValidationError):
    """基准测试描述不合法"""


class ModelFormatError(ModelValidationError):
    """模型文件格式错误"""


class ReportFormatError(ModelValidationError):
    """不支持的报告格式"""


class SolverError(SisdmdpError, RuntimeError):
    """数值求解失败"""


class ReducibleChainError(SolverError):
    """GTH 约简过程中出现零主元质量"""


class SingularSystemError(SolverError):
    """线性方程组奇异"""


class InconsistentSystemError(SolverError):
    """被替换的参考方程残差超限（ρ 错误或结构被破坏）"""


class NearAbsorbingStateError(SolverError):
    """非根状态的 d(s) = 1 - P(s,s) 过小"""


class NonCanonicalOrderError(SolverError):
    """分区内非根弧不满足由低到高的编号顺序"""
