"""
虹膜分割
积分微分算子定位瞳孔/虹膜边界，构建遮挡掩码，并在模板提取前执行质量门
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..models.imaging import (
    RawImage, SegMask, BoundaryCircle, Segmentation,
    QualityAssessment, QualityReason, annulus_mask,
)
from ..utils.errors import NoPupilFound, NoIrisFound, GeometryError

logger = logging.getLogger(__name__)


@dataclass
class SegmentationParams:
    """分割参数（半径单位为全分辨率像素）"""
    pupil_radius_min: float = 20.0
    pupil_radius_max: float = 110.0
    pupil_contrast_floor: float = 12.0
    iris_contrast_floor: float = 12.0
    iris_center_offset: float = 0.2
    pyramid_levels: int = 3
    refine_radius: int = 4
    coarse_step: int = 2
    ring_delta: float = 2.0
    specular_threshold: int = 250
    eyelid_edge_floor: float = 4.0
    eyelid_min_support: float = 0.5
    eyelid_max_residual: float = 2.5


@dataclass
class QualityThresholds:
    """质量门阈值"""
    usable_fraction: float = 0.40
    texture_energy: float = 2.0
    boundary_contrast: float = 10.0


@dataclass
class QualityMeasures:
    """质量门使用的三项测量值"""
    usable_fraction: float
    texture_energy: float
    boundary_contrast: float


# ---------------------------------------------------------------------------
# 圆周积分
# ---------------------------------------------------------------------------

def _ring_means(img: np.ndarray, cx: np.ndarray, cy: np.ndarray, r: np.ndarray,
                angles: np.ndarray) -> np.ndarray:
    """沿圆周双线性采样后求均值，返回每个候选圆的平均灰度"""
    xs = cx[:, None] + r[:, None] * np.cos(angles)[None, :]
    ys = cy[:, None] + r[:, None] * np.sin(angles)[None, :]
    samples = ndimage.map_coordinates(img, [ys.ravel(), xs.ravel()], order=1, mode="nearest")
    return samples.reshape(xs.shape).mean(axis=1)


def _contrast(img, cx, cy, r, angles, delta) -> Tuple[np.ndarray, np.ndarray]:
    """径向差分：外环均值减内环均值；同时返回内环均值"""
    inner = _ring_means(img, cx, cy, np.maximum(r - delta, 0.5), angles)
    outer = _ring_means(img, cx, cy, r + delta, angles)
    return outer - inner, inner


def _pyramid(image: np.ndarray, levels: int):
    """高斯金字塔，第0层为原图"""
    pyramid = [image]
    for _ in range(1, levels):
        smoothed = ndimage.gaussian_filter(pyramid[-1], sigma=1.0, mode="nearest")
        pyramid.append(smoothed[::2, ::2])
    return pyramid


def _grid(cx_values, cy_values, r_values):
    cx, cy, r = np.meshgrid(cx_values, cy_values, r_values, indexing="ij")
    return cx.ravel().astype(float), cy.ravel().astype(float), r.ravel().astype(float)


def _search(pyramid, coarse_grid, score_fn, refine: int, n_angles: Sequence[int],
            angle_window=None):
    """金字塔最粗层穷举搜索，逐层放大并在 ±refine 范围内细化

    Returns:
        (cx, cy, r, 原始对比度)，坐标为第0层像素；找不到有效候选时返回None
    """
    levels = len(pyramid)
    top = levels - 1

    def angles_for(level):
        count = n_angles[min(level, len(n_angles) - 1)]
        base = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return base if angle_window is None else base[angle_window(base)]

    cx, cy, r = coarse_grid
    score, contrast = score_fn(pyramid[top], cx, cy, r, angles_for(top), top)
    if not np.isfinite(score).any():
        return None
    best = int(np.argmax(score))
    est = (cx[best], cy[best], r[best])

    for level in range(top - 1, -1, -1):
        offsets = np.arange(-refine, refine + 1, dtype=float)
        cx, cy, r = _grid(est[0] * 2 + offsets, est[1] * 2 + offsets, est[2] * 2 + offsets)
        keep = r > 1.0
        cx, cy, r = cx[keep], cy[keep], r[keep]
        score, contrast = score_fn(pyramid[level], cx, cy, r, angles_for(level), level)
        if not np.isfinite(score).any():
            return None
        best = int(np.argmax(score))
        est = (cx[best], cy[best], r[best])

    return est[0], est[1], est[2], float(contrast[best])


# ---------------------------------------------------------------------------
# 边界定位
# ---------------------------------------------------------------------------

def locate_pupil(image: RawImage, params: Optional[SegmentationParams] = None) -> BoundaryCircle:
    """定位瞳孔边界

    在高斯金字塔最粗层对 (cx, cy, r) 穷举，取暗圆内外的相对对比度最大者，
    再逐层细化。对比度不足下限时抛出 NoPupilFound。
    """
    params = params or SegmentationParams()
    if min(image.width, image.height) < 128:
        raise GeometryError(f"图像过小，无法定位瞳孔: {image.width}x{image.height}")

    img = image.as_float()
    pyramid = _pyramid(img, params.pyramid_levels)
    top = params.pyramid_levels - 1
    scale = 2 ** top
    coarse = pyramid[top]

    r_min = max(2.0, params.pupil_radius_min / scale)
    r_max = max(r_min + 1.0, params.pupil_radius_max / scale)
    margin = int(np.ceil(r_min))
    step = params.coarse_step
    xs = np.arange(margin, coarse.shape[1] - margin, step)
    ys = np.arange(margin, coarse.shape[0] - margin, step)
    rs = np.arange(np.floor(r_min), np.ceil(r_max) + 1)
    grid = _grid(xs, ys, rs)

    def score_fn(level_img, cx, cy, r, angles, level):
        r_floor = params.pupil_radius_min / 2 ** level
        r_ceil = params.pupil_radius_max / 2 ** level
        contrast, inner = _contrast(level_img, cx, cy, r, angles, params.ring_delta)
        # 相对对比度偏好内部最暗的圆，使同心结构中返回内边界
        score = contrast / (inner + 10.0)
        valid = (contrast >= params.pupil_contrast_floor) & (r >= r_floor * 0.75) & (r <= r_ceil * 1.25)
        return np.where(valid, score, -np.inf), contrast

    found = _search(pyramid, grid, score_fn, params.refine_radius, [128, 64, 32])
    if found is None:
        raise NoPupilFound("未找到对比度高于下限的瞳孔边界")
    cx, cy, r, contrast = found
    logger.debug(f"瞳孔: ({cx:.1f}, {cy:.1f}) r={r:.1f} 对比度={contrast:.1f}")
    return BoundaryCircle(cx, cy, r)


def _lateral(angles: np.ndarray) -> np.ndarray:
    """只取左右两侧 ±45° 扇区，避开上下眼睑"""
    c = np.cos(angles)
    return np.abs(c) >= np.cos(np.pi / 4)


def locate_iris(image: RawImage, pupil: BoundaryCircle,
                params: Optional[SegmentationParams] = None) -> BoundaryCircle:
    """在瞳孔附近搜索虹膜外边界，半径范围 (1.2·rp, 5.0·rp]"""
    params = params or SegmentationParams()
    img = image.as_float()
    pyramid = _pyramid(img, params.pyramid_levels)
    top = params.pyramid_levels - 1
    scale = 2 ** top

    r_lo, r_hi = 1.2 * pupil.r, 5.0 * pupil.r
    offset = max(3.0, params.iris_center_offset * pupil.r)
    off = np.arange(-np.ceil(offset / scale), np.ceil(offset / scale) + 1)
    rs = np.arange(np.floor(r_lo / scale), np.ceil(r_hi / scale) + 1)
    grid = _grid(pupil.cx / scale + off, pupil.cy / scale + off, rs)

    def score_fn(level_img, cx, cy, r, angles, level):
        s = 2 ** level
        contrast, _ = _contrast(level_img, cx, cy, r, angles, params.ring_delta)
        full_r = r * s
        dist = np.hypot(cx * s - pupil.cx, cy * s - pupil.cy)
        valid = ((contrast >= params.iris_contrast_floor) & (full_r > r_lo) &
                 (full_r <= r_hi) & (dist <= offset + s))
        return np.where(valid, contrast, -np.inf), contrast

    found = _search(pyramid, grid, score_fn, params.refine_radius, [128, 96, 64],
                    angle_window=_lateral)
    if found is None:
        raise NoIrisFound("未找到对比度高于下限的虹膜外边界")
    cx, cy, r, contrast = found
    logger.debug(f"虹膜: ({cx:.1f}, {cy:.1f}) r={r:.1f} 对比度={contrast:.1f}")
    return BoundaryCircle(cx, cy, r)


# ---------------------------------------------------------------------------
# 遮挡掩码
# ---------------------------------------------------------------------------

def _fit_eyelid(gradient: np.ndarray, region: np.ndarray, sign: float,
                params: SegmentationParams) -> Optional[np.ndarray]:
    """在区域内逐列取带符号梯度极大值，最小二乘拟合抛物线；支撑不足或残差过大返回None"""
    columns = np.flatnonzero(region.any(axis=0))
    if columns.size < 8:
        return None
    xs, ys = [], []
    for x in columns:
        rows = np.flatnonzero(region[:, x])
        values = sign * gradient[rows, x]
        k = int(np.argmax(values))
        if values[k] >= params.eyelid_edge_floor:
            xs.append(x)
            ys.append(rows[k])
    if len(xs) < params.eyelid_min_support * columns.size:
        return None
    coeffs = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 2)
    residual = np.sqrt(np.mean((np.polyval(coeffs, xs) - ys) ** 2))
    if residual > params.eyelid_max_residual:
        return None
    return coeffs


def occlusion_mask(image: RawImage, pupil: BoundaryCircle, iris: BoundaryCircle,
                   params: Optional[SegmentationParams] = None) -> SegMask:
    """环形区域内的可用纹理掩码：剔除高光像素和眼睑抛物线之外的像素"""
    params = params or SegmentationParams()
    shape = image.pixels.shape
    annulus = annulus_mask(shape, pupil, iris)
    usable = annulus & (image.pixels < params.specular_threshold)

    smoothed = ndimage.gaussian_filter(image.as_float(), sigma=2.0)
    gy = np.gradient(smoothed, axis=0)

    # 搜索区域与两条边界保持距离，避免把瞳孔/虹膜边缘当作眼睑
    margin = 6.0
    inner = annulus_mask(
        shape,
        BoundaryCircle(pupil.cx, pupil.cy, pupil.r + margin),
        BoundaryCircle(iris.cx, iris.cy, max(iris.r - margin, pupil.r + margin + 1.0)),
    )
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    upper = inner & (yy < pupil.cy)
    lower = inner & (yy > pupil.cy)

    # 上眼睑：上亮下暗；下眼睑：上暗下亮
    upper_fit = _fit_eyelid(gy, upper, -1.0, params)
    if upper_fit is not None:
        usable &= ~(yy < np.polyval(upper_fit, xx))
    lower_fit = _fit_eyelid(gy, lower, 1.0, params)
    if lower_fit is not None:
        usable &= ~(yy > np.polyval(lower_fit, xx))
    return SegMask(usable)


def segment(image: RawImage, params: Optional[SegmentationParams] = None) -> Segmentation:
    """完整分割：瞳孔 → 虹膜 → 遮挡掩码"""
    params = params or SegmentationParams()
    pupil = locate_pupil(image, params)
    iris = locate_iris(image, pupil, params)
    return Segmentation(pupil=pupil, iris=iris, occlusion=occlusion_mask(image, pupil, iris, params))


# ---------------------------------------------------------------------------
# 质量门
# ---------------------------------------------------------------------------

def texture_energy(image: RawImage, usable: np.ndarray) -> float:
    """可用环形区域内高通响应的标准差"""
    if not usable.any():
        return 0.0
    img = image.as_float()
    high_pass = img - ndimage.gaussian_filter(img, sigma=2.0)
    return float(np.std(high_pass[usable]))


def boundary_contrast(image: RawImage, pupil: BoundaryCircle, iris: BoundaryCircle,
                      delta: float = 3.0) -> float:
    """瞳孔边界与虹膜边界两处径向对比度中的较小者（负值截为0）"""
    img = image.as_float()
    full = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
    lateral = full[_lateral(full)]
    pupil_c, _ = _contrast(img, np.array([pupil.cx]), np.array([pupil.cy]), np.array([pupil.r]), full, delta)
    iris_c, _ = _contrast(img, np.array([iris.cx]), np.array([iris.cy]), np.array([iris.r]), lateral, delta)
    return float(max(0.0, min(pupil_c[0], iris_c[0])))


def measure_quality(image: RawImage, segmentation: Segmentation) -> QualityMeasures:
    """测量可用比例、纹理能量和边界对比度"""
    annulus = segmentation.annulus()
    area = int(np.count_nonzero(annulus))
    usable = segmentation.occlusion.bits & annulus
    fraction = float(np.count_nonzero(usable)) / area if area else 0.0
    return QualityMeasures(
        usable_fraction=fraction,
        texture_energy=texture_energy(image, usable),
        boundary_contrast=boundary_contrast(image, segmentation.pupil, segmentation.iris),
    )


def judge_quality(measures: QualityMeasures, thresholds: QualityThresholds) -> QualityAssessment:
    """按阈值给出质量结论（低于阈值即失败）"""
    reasons = []
    if measures.usable_fraction < thresholds.usable_fraction:
        reasons.append(QualityReason.LOW_USABLE_FRACTION)
    if measures.texture_energy < thresholds.texture_energy:
        reasons.append(QualityReason.LOW_TEXTURE)
    if measures.boundary_contrast < thresholds.boundary_contrast:
        reasons.append(QualityReason.LOW_BOUNDARY_CONTRAST)
    return QualityAssessment(
        usable_fraction=measures.usable_fraction,
        texture_energy=measures.texture_energy,
        boundary_contrast=measures.boundary_contrast,
        passed=not reasons,
        reasons=reasons,
    )


def assess_quality(image: RawImage, segmentation: Segmentation,
                   thresholds: Optional[QualityThresholds] = None) -> QualityAssessment:
    """模板提取前的质量评估"""
    return judge_quality(measure_quality(image, segmentation), thresholds or QualityThresholds())


def calibrate_texture_floor(energies: Sequence[float], fraction: float = 0.35) -> float:
    """以真实语料纹理能量中位数的一定比例作为纹理下限"""
    values = np.asarray([e for e in energies if np.isfinite(e)], dtype=float)
    if values.size == 0:
        return 0.0
    return float(fraction * np.median(values))
