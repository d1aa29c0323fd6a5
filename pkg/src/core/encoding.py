"""
虹膜编码
橡皮筋模型极坐标归一化，以及二值化滤波器组响应生成比特模板
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage, signal

from .segmentation import SegmentationParams, QualityThresholds, segment, assess_quality
from ..models.imaging import RawImage, Segmentation, QualityAssessment, QualityReason
from ..models.template import IrisTemplate, TemplateMeta
from ..utils.errors import GeometryError, RankError, DimensionMismatch, IrisAuditError

logger = logging.getLogger(__name__)


@dataclass
class PolarIris:
    """归一化后的极坐标虹膜：samples/valid 形状均为 (R, Θ)"""
    samples: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.samples.ndim != 2 or self.samples.shape != self.valid.shape:
            raise DimensionMismatch(f"极坐标网格形状不一致: {self.samples.shape} / {self.valid.shape}")

    @property
    def radial_res(self) -> int:
        return int(self.samples.shape[0])

    @property
    def angular_res(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class FilterBank:
    """零均值、两两正交的滤波器组，taps 形状为 (k, s, s)"""
    taps: np.ndarray
    seed: Optional[int] = None

    @property
    def count(self) -> int:
        return int(self.taps.shape[0])

    @property
    def size(self) -> int:
        return int(self.taps.shape[1])

    def save(self, file_path: str):
        """保存为 .npz，便于替换为真实的 BSIF 滤波器"""
        np.savez(file_path, taps=self.taps, seed=-1 if self.seed is None else self.seed)

    @classmethod
    def load(cls, file_path: str) -> "FilterBank":
        with np.load(file_path) as data:
            taps = np.asarray(data["taps"], dtype=np.float64)
            seed = int(data["seed"]) if "seed" in data else -1
        if taps.ndim != 3 or taps.shape[1] != taps.shape[2]:
            raise DimensionMismatch(f"滤波器形状必须为 (k, s, s): {taps.shape}")
        return cls(taps=taps, seed=None if seed < 0 else seed)


def rubber_sheet(image: RawImage, segmentation: Segmentation, radial_res: int = 64,
                 angular_res: int = 512) -> PolarIris:
    """橡皮筋模型归一化

    第 r 行在瞳孔边界(r=0)与虹膜边界(r=R-1)之间线性插值，第 θ 列对应角度 θ·2π/Θ。
    极坐标样本有效当且仅当其四个源像素邻居都可用。
    """
    pupil, iris = segmentation.pupil, segmentation.iris
    if iris.r <= pupil.r:
        raise GeometryError(f"虹膜半径 {iris.r} 不大于瞳孔半径 {pupil.r}")

    t = np.linspace(0.0, 1.0, radial_res)[:, None]
    theta = (np.arange(angular_res) * 2.0 * np.pi / angular_res)[None, :]
    cos, sin = np.cos(theta), np.sin(theta)
    px, py = pupil.cx + pupil.r * cos, pupil.cy + pupil.r * sin
    ix, iy = iris.cx + iris.r * cos, iris.cy + iris.r * sin
    xs = (1.0 - t) * px + t * ix
    ys = (1.0 - t) * py + t * iy

    samples = ndimage.map_coordinates(image.as_float(), [ys, xs], order=1, mode="nearest")

    height, width = image.pixels.shape
    x0, y0 = np.floor(xs).astype(int), np.floor(ys).astype(int)
    x1, y1 = x0 + 1, y0 + 1
    inside = (x0 >= 0) & (y0 >= 0) & (x1 < width) & (y1 < height)
    usable = segmentation.occlusion.bits
    cx0, cx1 = np.clip(x0, 0, width - 1), np.clip(x1, 0, width - 1)
    cy0, cy1 = np.clip(y0, 0, height - 1), np.clip(y1, 0, height - 1)
    valid = inside & usable[cy0, cx0] & usable[cy0, cx1] & usable[cy1, cx0] & usable[cy1, cx1]
    return PolarIris(samples=samples, valid=valid)


def build_filter_bank(seed: int, count: int = 8, size: int = 9) -> FilterBank:
    """生成伪随机滤波器组：减去均值后按生成顺序做 Gram-Schmidt 正交归一化"""
    if count > size * size - 1:
        raise RankError(f"滤波器数量 {count} 超过 {size}x{size} 零均值子空间的维数 {size * size - 1}")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((count, size * size))
    raw -= raw.mean(axis=1, keepdims=True)

    basis = []
    for vector in raw:
        v = vector.copy()
        # 两遍正交化以压低舍入误差
        for _ in range(2):
            for b in basis:
                v -= np.dot(v, b) * b
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise RankError("滤波器线性相关，无法正交化")
        basis.append(v / norm)
    taps = np.stack(basis).reshape(count, size, size)
    return FilterBank(taps=taps, seed=seed)


def trimmed_rows(radial_res: int, filter_size: int) -> int:
    """去掉上下 ⌊s/2⌋ 行后的行数 R'"""
    return radial_res - 2 * (filter_size // 2)


def encode(polar: PolarIris, bank: FilterBank, meta: Optional[TemplateMeta] = None) -> IrisTemplate:
    """二值化滤波响应

    角度方向循环卷积，径向上下各裁掉 ⌊s/2⌋ 行；响应严格大于0记为1。
    掩码位为1当且仅当卷积核覆盖的所有极坐标样本都有效。
    """
    half = bank.size // 2
    if polar.radial_res <= 2 * half:
        raise DimensionMismatch(f"径向分辨率 {polar.radial_res} 小于滤波器尺寸 {bank.size}")

    valid_samples = polar.samples[polar.valid]
    # 零均值滤波器对常数平移不敏感；减去中位数使常数区域的响应严格为0
    center = float(np.median(valid_samples)) if valid_samples.size else 0.0
    centered = polar.samples - center
    padded = np.pad(centered, ((0, 0), (half, half)), mode="wrap")

    responses = np.stack(
        [signal.correlate2d(padded, kernel, mode="valid") for kernel in bank.taps],
        axis=-1,
    )
    code = responses > 0

    invalid = np.pad((~polar.valid).astype(np.int32), ((0, 0), (half, half)), mode="wrap")
    footprint = signal.correlate2d(invalid, np.ones((bank.size, bank.size), dtype=np.int32), mode="valid")
    mask = np.repeat((footprint == 0)[:, :, None], bank.count, axis=2)

    if meta is None:
        meta = TemplateMeta(template_id="", identity="")
    return IrisTemplate(code=code, mask=mask, meta=meta)


@dataclass
class ExtractionResult:
    """单幅图像的提取结果：未通过质量门时 template 为 None"""
    quality: QualityAssessment
    template: Optional[IrisTemplate] = None
    segmentation: Optional[Segmentation] = None


def extract_template(image: RawImage, bank: FilterBank, meta: Optional[TemplateMeta] = None,
                     params: Optional[SegmentationParams] = None,
                     thresholds: Optional[QualityThresholds] = None,
                     radial_res: int = 64, angular_res: int = 512,
                     enforce_quality_gate: bool = True) -> ExtractionResult:
    """分割 → 质量门 → 归一化 → 编码"""
    try:
        seg = segment(image, params)
    except IrisAuditError as e:
        logger.debug(f"分割失败: {e}")
        return ExtractionResult(quality=QualityAssessment.rejected(QualityReason.SEGMENTATION_FAILED))

    quality = assess_quality(image, seg, thresholds)
    if not quality.passed and enforce_quality_gate:
        return ExtractionResult(quality=quality, segmentation=seg)

    if meta is not None:
        meta.quality = quality.to_dict()
    polar = rubber_sheet(image, seg, radial_res, angular_res)
    return ExtractionResult(quality=quality, template=encode(polar, bank, meta), segmentation=seg)
