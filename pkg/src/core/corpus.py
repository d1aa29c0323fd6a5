"""
语料整理
闭眼过滤、以瞳孔为中心裁剪、左右镜像增广以及ISO画幅转换
"""

import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import List, Tuple, Optional, Sequence, Dict

import numpy as np
from PIL import Image
from scipy import ndimage

from ..models.imaging import RawImage, SegMask
from ..models.corpus_data import CorpusEntry, CorpusManifest, ManifestRecord
from ..utils.errors import MissingMask, BorderViolation, DimensionMismatch
from ..utils.image_io import read_image, write_image, read_mask, write_mask

logger = logging.getLogger(__name__)

ISO_WIDTH = 640
ISO_HEIGHT = 480
PAD_GRAY = 128


def mask_coverage(mask: SegMask) -> int:
    """掩码中置位像素的数量"""
    return int(np.count_nonzero(mask.bits))


def default_blink_threshold(entries: Sequence[CorpusEntry], fraction: float = 0.3) -> int:
    """默认闭眼阈值：语料中最大覆盖度的一定比例"""
    coverages = []
    for entry in entries:
        if entry.mask is None:
            raise MissingMask(f"条目缺少掩码: {entry.entry_id}")
        coverages.append(mask_coverage(entry.mask))
    if not coverages:
        return 0
    return int(math.ceil(fraction * max(coverages)))


def blink_filter(entries: Sequence[CorpusEntry], threshold: int) -> Tuple[List[CorpusEntry], List[CorpusEntry]]:
    """闭眼过滤：覆盖度 >= 阈值的条目保留，其余丢弃（保持原顺序）"""
    kept, discarded = [], []
    for entry in entries:
        if entry.mask is None:
            raise MissingMask(f"条目缺少掩码: {entry.entry_id}")
        if mask_coverage(entry.mask) >= threshold:
            kept.append(entry)
        else:
            discarded.append(entry)
    return kept, discarded


def center_crop(entry: CorpusEntry, pupil_center: Tuple[float, float], size: int = 512) -> CorpusEntry:
    """以瞳孔中心为中心裁剪 size×size 窗口，像素值原样保留"""
    half = size // 2
    cx, cy = int(round(pupil_center[0])), int(round(pupil_center[1]))
    x0, y0 = cx - half, cy - half
    x1, y1 = x0 + size, y0 + size
    if x0 < 0 or y0 < 0 or x1 > entry.image.width or y1 > entry.image.height:
        raise BorderViolation(
            f"裁剪窗口 [{x0}, {x1}) x [{y0}, {y1}) 超出图像边界 "
            f"{entry.image.width}x{entry.image.height}: {entry.entry_id}"
        )

    image = RawImage(entry.image.pixels[y0:y1, x0:x1].copy())
    mask = None
    if entry.mask is not None:
        mask = SegMask(entry.mask.bits[y0:y1, x0:x1].copy())
    return replace(entry, image=image, mask=mask)


def mirror_entry(entry: CorpusEntry) -> CorpusEntry:
    """左右翻转：像素 (x, y) 映射到 (W-1-x, y)"""
    image = RawImage(entry.image.pixels[:, ::-1].copy())
    mask = SegMask(entry.mask.bits[:, ::-1].copy()) if entry.mask is not None else None
    return replace(entry, image=image, mask=mask, mirrored=not entry.mirrored)


def mirror_augment(corpus: Sequence[CorpusEntry]) -> List[CorpusEntry]:
    """镜像增广：在原语料后追加翻转副本，语料规模翻倍"""
    return list(corpus) + [mirror_entry(entry) for entry in corpus]


def iso_pad_width(size: int) -> int:
    """补齐到4:3所需的每侧灰条宽度（512 -> 86）"""
    return int(math.ceil(size / 6))


def iso_frame(image: RawImage, size: int = 512, out_width: int = ISO_WIDTH,
              out_height: int = ISO_HEIGHT) -> RawImage:
    """左右补灰条恢复4:3画幅，再双线性缩放到 640x480"""
    if image.width != size or image.height != size:
        raise DimensionMismatch(f"输入必须是 {size}x{size}，实际为 {image.width}x{image.height}")
    pad = iso_pad_width(size)
    padded = np.pad(image.pixels, ((0, 0), (pad, pad)), mode="constant", constant_values=PAD_GRAY)
    resized = Image.fromarray(padded).resize((out_width, out_height), Image.Resampling.BILINEAR)
    return RawImage(np.asarray(resized, dtype=np.uint8))


def pupil_center_from_mask(mask: SegMask) -> Optional[Tuple[float, float]]:
    """由虹膜掩码包围的空洞（瞳孔）求中心；空洞不存在时返回None"""
    filled = ndimage.binary_fill_holes(mask.bits)
    hole = filled & ~mask.bits
    if not hole.any():
        return None
    cy, cx = ndimage.center_of_mass(hole)
    return float(cx), float(cy)


@dataclass
class CurationOutcome:
    """整理结果及各阶段计数"""
    kept: List[CorpusEntry] = field(default_factory=list)
    counts: Dict[str, int] = field(default_factory=dict)
    threshold: int = 0


def curate_entries(entries: Sequence[CorpusEntry], threshold: Optional[int] = None,
                   threshold_fraction: float = 0.3, crop_size: int = 512,
                   locate=None) -> CurationOutcome:
    """依次执行闭眼过滤和瞳孔中心裁剪

    Args:
        entries: 带掩码的原始条目
        threshold: 闭眼阈值，None 时按最大覆盖度比例计算
        threshold_fraction: 默认阈值比例
        crop_size: 裁剪尺寸
        locate: 掩码无法给出瞳孔中心时的回退定位函数 image -> (x, y)
    """
    if threshold is None:
        threshold = default_blink_threshold(entries, threshold_fraction)
    kept, blinked = blink_filter(entries, threshold)
    for entry in blinked:
        logger.debug(f"闭眼帧被丢弃: {entry.entry_id}")

    cropped, border = [], 0
    for entry in kept:
        center = pupil_center_from_mask(entry.mask)
        if center is None and locate is not None:
            center = locate(entry.image)
        if center is None:
            border += 1
            logger.warning(f"无法确定瞳孔中心，按越界处理: {entry.entry_id}")
            continue
        try:
            cropped.append(center_crop(entry, center, crop_size))
        except BorderViolation as e:
            border += 1
            logger.debug(str(e))

    cropped.sort(key=lambda e: e.sort_key())
    counts = {
        "input": len(entries),
        "blink": len(blinked),
        "border": border,
        "kept": len(cropped),
    }
    logger.info(f"整理完成: 输入 {counts['input']}，闭眼 {counts['blink']}，越界 {counts['border']}，保留 {counts['kept']}")
    return CurationOutcome(kept=cropped, counts=counts, threshold=threshold)


def load_entry(manifest: CorpusManifest, record: ManifestRecord) -> CorpusEntry:
    """按清单记录读取图像及掩码"""
    image = read_image(manifest.resolve(record.path))
    mask = read_mask(manifest.resolve(record.mask_path)) if record.mask_path else None
    return CorpusEntry(
        image=image,
        identity=record.identity,
        frame_index=record.frame,
        origin=record.origin_info,
        mask=mask,
        mirrored=record.mirrored,
    )


def save_entry(entry: CorpusEntry, base_dir: str, sub_dir: str = "",
               extra: Optional[Dict] = None) -> ManifestRecord:
    """写出条目的图像/掩码PNG，返回相对 base_dir 的清单记录"""
    rel_dir = sub_dir.replace(os.sep, "/")
    os.makedirs(os.path.join(base_dir, sub_dir), exist_ok=True)
    name = entry.entry_id
    image_rel = f"{rel_dir}/{name}.png" if rel_dir else f"{name}.png"
    write_image(os.path.join(base_dir, image_rel), entry.image)
    mask_rel = None
    if entry.mask is not None:
        mask_rel = f"{rel_dir}/{name}_mask.png" if rel_dir else f"{name}_mask.png"
        write_mask(os.path.join(base_dir, mask_rel), entry.mask)
    return ManifestRecord(
        path=image_rel,
        identity=entry.identity,
        frame=entry.frame_index,
        origin=entry.origin.kind.value,
        mask_path=mask_rel,
        snapshot=entry.origin.snapshot_id,
        seed=entry.origin.seed,
        mirrored=entry.mirrored,
        extra=dict(extra or {}),
    )
