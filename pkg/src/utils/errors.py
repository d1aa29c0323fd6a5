"""
异常类型定义
审计流程中各模块抛出的具名错误
"""


class IrisAuditError(RuntimeError):
    """审计工具的基础异常"""


class MissingMask(IrisAuditError):
    """条目缺少分割掩码"""


class BorderViolation(IrisAuditError):
    """裁剪窗口超出图像边界"""


class DimensionMismatch(IrisAuditError):
    """尺寸不一致"""


class NoPupilFound(IrisAuditError):
    """未找到满足对比度下限的瞳孔边界"""


class NoIrisFound(IrisAuditError):
    """未找到满足对比度下限的虹膜外边界"""


class GeometryError(IrisAuditError):
    """分割几何关系退化"""


class RankError(IrisAuditError):
    """滤波器数量超过可正交化的秩"""


class InsufficientOverlap(IrisAuditError):
    """所有平移下有效比特重叠都低于下限"""


class OrientationError(IrisAuditError):
    """分数方向不一致"""


class InsufficientData(IrisAuditError):
    """样本数量不足"""


class DegenerateDistribution(IrisAuditError):
    """分布退化（标准差为0）"""


class SpecError(IrisAuditError):
    """合成参数不合法"""


class TemplateFormatError(IrisAuditError):
    """模板文件格式错误"""


class StageInputMissing(IrisAuditError):
    """前一阶段的产物缺失"""

    def __init__(self, stage: str, path: str):
        self.stage = stage
        self.path = path
        super().__init__(f"缺少 {stage} 阶段的输出: {path}（请先运行 {stage}）")
