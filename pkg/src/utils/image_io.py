"""
PNG图像读写
灰度图像按8位读写，掩码写为8位（非零即置位）
"""

import numpy as np
from PIL import Image

from ..models.imaging import RawImage, SegMask
from .errors import IrisAuditError


def read_image(path: str) -> RawImage:
    """读取8位灰度PNG（彩色图像会被转换为灰度）"""
    try:
        with Image.open(path) as img:
            return RawImage(np.array(img.convert("L"), dtype=np.uint8))
    except OSError as e:
        raise IrisAuditError(f"无法读取图像 {path}: {e}")


def write_image(path: str, image: RawImage):
    """写入8位灰度PNG"""
    try:
        Image.fromarray(image.pixels).save(path, format="PNG")
    except OSError as e:
        raise IrisAuditError(f"无法写入图像 {path}: {e}")


def read_mask(path: str) -> SegMask:
    """读取1位或8位掩码PNG"""
    try:
        with Image.open(path) as img:
            return SegMask(np.array(img.convert("L")) != 0)
    except OSError as e:
        raise IrisAuditError(f"无法读取掩码 {path}: {e}")


def write_mask(path: str, mask: SegMask):
    """写入掩码PNG（0/255）"""
    try:
        Image.fromarray(mask.bits.astype(np.uint8) * 255).save(path, format="PNG")
    except OSError as e:
        raise IrisAuditError(f"无法写入掩码 {path}: {e}")
