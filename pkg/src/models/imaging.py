"""
图像数据模型
灰度图像、分割掩码、边界圆与质量评估结果
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Dict, Any

import numpy as np

from ..utils.errors import DimensionMismatch, GeometryError


@dataclass
class RawImage:
    """8位灰度图像，行优先存储"""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] == 0 or pixels.shape[1] == 0:
            raise DimensionMismatch(f"图像必须是非空二维数组: {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.min() < 0 or pixels.max() > 255:
                raise ValueError("像素值必须在 [0, 255] 范围内")
            pixels = pixels.astype(np.uint8)
        self.pixels = pixels

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)


@dataclass
class SegMask:
    """二值掩码，1表示可见虹膜纹理"""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DimensionMismatch(f"掩码必须是二维数组: {bits.shape}")
        self.bits = bits.astype(bool)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    def matches(self, image: RawImage) -> bool:
        """掩码尺寸是否与图像一致"""
        return self.bits.shape == image.pixels.shape


@dataclass(frozen=True)
class BoundaryCircle:
    """边界圆（允许亚像素）"""
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise GeometryError(f"圆半径必须为正: {self.r}")

    def contains(self, x: float, y: float) -> bool:
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.r ** 2

    def shifted(self, dx: float, dy: float) -> "BoundaryCircle":
        return BoundaryCircle(self.cx + dx, self.cy + dy, self.r)

    def scaled(self, factor: float) -> "BoundaryCircle":
        return BoundaryCircle(self.cx * factor, self.cy * factor, self.r * factor)

    def to_dict(self) -> Dict[str, float]:
        return {"cx": float(self.cx), "cy": float(self.cy), "r": float(self.r)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundaryCircle":
        return cls(cx=float(data["cx"]), cy=float(data["cy"]), r=float(data["r"]))


def annulus_mask(shape, pupil: BoundaryCircle, iris: BoundaryCircle) -> np.ndarray:
    """瞳孔圆与虹膜圆之间的环形区域"""
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    inside_iris = (xx - iris.cx) ** 2 + (yy - iris.cy) ** 2 <= iris.r ** 2
    outside_pupil = (xx - pupil.cx) ** 2 + (yy - pupil.cy) ** 2 > pupil.r ** 2
    return inside_iris & outside_pupil


@dataclass
class Segmentation:
    """分割结果：瞳孔圆、虹膜圆和遮挡掩码"""
    pupil: BoundaryCircle
    iris: BoundaryCircle
    occlusion: SegMask

    def __post_init__(self):
        if not self.iris.r > self.pupil.r:
            raise GeometryError(f"虹膜半径 {self.iris.r} 必须大于瞳孔半径 {self.pupil.r}")
        if not self.iris.contains(self.pupil.cx, self.pupil.cy):
            raise GeometryError("瞳孔中心不在虹膜圆内")

    def annulus(self) -> np.ndarray:
        return annulus_mask(self.occlusion.bits.shape, self.pupil, self.iris)

    def to_dict(self) -> Dict[str, Any]:
        return {"pupil": self.pupil.to_dict(), "iris": self.iris.to_dict()}


class QualityReason(Enum):
    """质量门拒绝原因"""
    LOW_USABLE_FRACTION = "LowUsableFraction"
    LOW_TEXTURE = "LowTexture"
    LOW_BOUNDARY_CONTRAST = "LowBoundaryContrast"
    SEGMENTATION_FAILED = "SegmentationFailed"


@dataclass
class QualityAssessment:
    """质量评估结果"""
    usable_fraction: float
    texture_energy: float
    boundary_contrast: float
    passed: bool
    reasons: List[QualityReason] = field(default_factory=list)

    def __post_init__(self):
        if self.passed and self.reasons:
            raise ValueError("通过质量门的评估不能带有失败原因")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "usable_fraction": float(self.usable_fraction),
            "texture_energy": float(self.texture_energy),
            "boundary_contrast": float(self.boundary_contrast),
            "pass": bool(self.passed),
            "reasons": [reason.value for reason in self.reasons],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QualityAssessment":
        return cls(
            usable_fraction=float(data["usable_fraction"]),
            texture_energy=float(data["texture_energy"]),
            boundary_contrast=float(data["boundary_contrast"]),
            passed=bool(data["pass"]),
            reasons=[QualityReason(value) for value in data.get("reasons", [])],
        )

    @classmethod
    def rejected(cls, reason: QualityReason) -> "QualityAssessment":
        """分割失败时的拒绝结论"""
        return cls(0.0, 0.0, 0.0, False, [reason])
