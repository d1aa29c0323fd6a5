"""
合成数据
参数化虹膜渲染（带真值分割）、真实语料模拟，以及可控记忆率与快照保真度的生成器模拟
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .corpus import blink_filter, center_crop, default_blink_threshold, pupil_center_from_mask
from ..models.corpus_data import CorpusEntry, Origin, entry_id
from ..models.imaging import RawImage, SegMask, BoundaryCircle, Segmentation, annulus_mask
from ..utils.errors import SpecError
from ..utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

TEXTURE_ROWS = 64
TEXTURE_COLUMNS = 512

PUPIL_LEVEL = 25.0
IRIS_INNER_LEVEL = 90.0
IRIS_OUTER_LEVEL = 110.0
SCLERA_LEVEL = 185.0
SKIN_LEVEL = 170.0

REAL_FRAME_WIDTH = 768
REAL_FRAME_HEIGHT = 576
FAKE_SIZE = 512
MAX_FIDELITY = 14
LEAK_NOISE_SIGMA = 1.5


@dataclass(frozen=True)
class IdentitySpec:
    """一只虹膜的身份参数"""
    texture_seed: int
    iris_radius: float = 110.0
    base_pupil_radius: float = 40.0
    octaves: int = 4
    base_sigma: float = 6.0
    persistence: float = 0.6
    contrast: float = 28.0

    def __post_init__(self):
        if not self.iris_radius > self.base_pupil_radius > 0:
            raise SpecError(f"要求 iris_radius > base_pupil_radius > 0: {self.iris_radius}, {self.base_pupil_radius}")
        if self.octaves < 1:
            raise SpecError(f"octaves 至少为1: {self.octaves}")


@dataclass(frozen=True)
class CaptureSpec:
    """一次采集的参数；eyelid_closure 为 0 时眼睑完全不遮挡虹膜，为 1 时完全闭合"""
    dilation_factor: float = 1.0
    rotation: float = 0.0
    noise_sigma: float = 2.0
    blur_sigma: float = 0.8
    width: int = FAKE_SIZE
    height: int = FAKE_SIZE
    center: Optional[Tuple[float, float]] = None
    eyelid_closure: float = 0.0
    noise_seed: int = 0

    def center_point(self) -> Tuple[float, float]:
        if self.center is not None:
            return self.center
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0

    def validate_for(self, identity: IdentitySpec):
        pupil_r = identity.base_pupil_radius * self.dilation_factor
        if not 0 < pupil_r < identity.iris_radius:
            raise SpecError(f"扩张后的瞳孔半径 {pupil_r:.1f} 必须在 (0, {identity.iris_radius}) 内")
        if not 0.0 <= self.eyelid_closure <= 1.0:
            raise SpecError(f"eyelid_closure 必须在 [0, 1] 内: {self.eyelid_closure}")
        cx, cy = self.center_point()
        r = identity.iris_radius
        if cx - r < 0 or cy - r < 0 or cx + r > self.width - 1 or cy + r > self.height - 1:
            raise SpecError(f"虹膜圆超出画面 {self.width}x{self.height}")


@dataclass
class RenderedIris:
    """渲染结果：图像、真值掩码和真值分割"""
    image: RawImage
    mask: SegMask
    segmentation: Segmentation


# ---------------------------------------------------------------------------
# 纹理
# ---------------------------------------------------------------------------

def polar_texture(identity: IdentitySpec) -> np.ndarray:
    """极坐标带限噪声纹理 (TEXTURE_ROWS, TEXTURE_COLUMNS)，角度方向首尾相接，标准差为1"""
    rng = np.random.default_rng(identity.texture_seed)
    texture = np.zeros((TEXTURE_ROWS, TEXTURE_COLUMNS))
    amplitude, sigma = 1.0, identity.base_sigma
    for _ in range(identity.octaves):
        noise = rng.standard_normal((TEXTURE_ROWS, TEXTURE_COLUMNS))
        octave = ndimage.gaussian_filter(noise, sigma=sigma, mode=("nearest", "wrap"))
        octave /= octave.std() or 1.0
        texture += amplitude * octave
        amplitude *= identity.persistence
        sigma /= 2.0
    texture -= texture.mean()
    return texture / (texture.std() or 1.0)


def _eyelids(xx: np.ndarray, yy: np.ndarray, cx: float, cy: float, r: float, closure: float) -> np.ndarray:
    """上下眼睑覆盖区域；闭合度升高时上眼睑下移"""
    curvature = 1.0 / (4.0 * r)
    upper = cy - r * (1.15 - 2.3 * closure) + curvature * (xx - cx) ** 2
    lower = cy + 1.1 * r - curvature * (xx - cx) ** 2
    return (yy < upper) | (yy > lower)


def render_iris(identity: IdentitySpec, capture: CaptureSpec,
                prototype: Optional[np.ndarray] = None, prototype_weight: float = 0.0) -> RenderedIris:
    """渲染一幅虹膜图像

    纹理定义在 (归一化半径, 角度) 上，因此瞳孔扩张拉伸纹理而不替换纹理；
    旋转 φ 度使纹理在角度方向平移 φ。prototype 不为空时纹理按权重向原型混合。
    """
    capture.validate_for(identity)
    cx, cy = capture.center_point()
    pupil = BoundaryCircle(cx, cy, identity.base_pupil_radius * capture.dilation_factor)
    iris = BoundaryCircle(cx, cy, identity.iris_radius)

    texture = polar_texture(identity)
    if prototype is not None and prototype_weight > 0:
        texture = (1.0 - prototype_weight) * texture + prototype_weight * prototype

    shape = (capture.height, capture.width)
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    rho = np.hypot(dx, dy)
    phi = np.mod(np.arctan2(dy, dx) - math.radians(capture.rotation), 2.0 * math.pi)

    t = np.clip((rho - pupil.r) / (iris.r - pupil.r), 0.0, 1.0)
    rows = t * (TEXTURE_ROWS - 1)
    cols = phi / (2.0 * math.pi) * TEXTURE_COLUMNS
    sampled = ndimage.map_coordinates(texture, [rows, cols], order=1, mode="grid-wrap")
    iris_level = IRIS_INNER_LEVEL + (IRIS_OUTER_LEVEL - IRIS_INNER_LEVEL) * t + identity.contrast * sampled

    annulus = annulus_mask(shape, pupil, iris)
    canvas = np.full(shape, SCLERA_LEVEL)
    canvas[annulus] = iris_level[annulus]
    canvas[rho * rho <= pupil.r * pupil.r] = PUPIL_LEVEL
    lids = _eyelids(xx, yy, cx, cy, iris.r, capture.eyelid_closure)
    canvas[lids] = SKIN_LEVEL

    if capture.blur_sigma > 0:
        canvas = ndimage.gaussian_filter(canvas, sigma=capture.blur_sigma)
    if capture.noise_sigma > 0:
        canvas = canvas + np.random.default_rng(capture.noise_seed).normal(0.0, capture.noise_sigma, shape)
    image = RawImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))

    usable = annulus & ~lids
    mask = SegMask(usable)
    return RenderedIris(image=image, mask=mask, segmentation=Segmentation(pupil, iris, mask))


# ---------------------------------------------------------------------------
# 真实语料模拟
# ---------------------------------------------------------------------------

def identity_name(index: int) -> str:
    """身份编号：S01-L, S01-R, S02-L ..."""
    return f"S{index // 2 + 1:02d}-{'L' if index % 2 == 0 else 'R'}"


def random_identity(rng: np.random.Generator, texture_seed: int) -> IdentitySpec:
    return IdentitySpec(
        texture_seed=texture_seed,
        iris_radius=float(rng.uniform(100.0, 125.0)),
        base_pupil_radius=float(rng.uniform(32.0, 45.0)),
    )


def stimulus_dilation(frame: int, frames: int) -> float:
    """光刺激下的瞳孔动态：由放大逐步收缩"""
    tau = max(frames / 4.0, 1.0)
    return 1.3 - 0.45 * (1.0 - math.exp(-frame / tau))


def planted_blink(seed: int, identity_index: int, frame: int, blink_rate: float) -> bool:
    """该帧是否渲染为闭眼帧（与 render_real_frame 使用同一随机流的第一次抽样）"""
    return bool(make_rng(seed, "capture", identity_name(identity_index), frame).random() < blink_rate)


def render_real_frame(seed: int, identity_index: int, frame: int, frames: int,
                      blink_rate: float = 0.0) -> CorpusEntry:
    """渲染某个身份的一帧采集图像"""
    name = identity_name(identity_index)
    identity = random_identity(make_rng(seed, "identity", name), derive_seed(seed, "texture", name))
    rng = make_rng(seed, "capture", name, frame)
    blink = rng.random() < blink_rate
    capture = CaptureSpec(
        dilation_factor=stimulus_dilation(frame, frames) + float(rng.normal(0.0, 0.02)),
        rotation=float(rng.uniform(-2.0, 2.0)),
        noise_sigma=2.0,
        blur_sigma=0.8,
        width=REAL_FRAME_WIDTH,
        height=REAL_FRAME_HEIGHT,
        center=((REAL_FRAME_WIDTH - 1) / 2.0 + float(rng.uniform(-60.0, 60.0)),
                (REAL_FRAME_HEIGHT - 1) / 2.0 + float(rng.uniform(-24.0, 24.0))),
        eyelid_closure=float(rng.uniform(0.9, 1.0)) if blink else 0.0,
        noise_seed=derive_seed(seed, "noise", name, frame),
    )
    rendered = render_iris(identity, capture)
    return CorpusEntry(
        image=rendered.image,
        identity=name,
        frame_index=frame,
        origin=Origin.real(),
        mask=rendered.mask,
    )


def training_crops(entries: Sequence[CorpusEntry], crop_size: int = 512,
                   threshold_fraction: float = 0.3) -> List[CorpusEntry]:
    """生成器的训练集：去掉闭眼帧后以瞳孔为中心裁剪（与语料整理一致）"""
    kept, _ = blink_filter(entries, default_blink_threshold(entries, threshold_fraction))
    crops = []
    for entry in kept:
        center = pupil_center_from_mask(entry.mask)
        if center is not None:
            crops.append(center_crop(entry, center, crop_size))
    return crops


# ---------------------------------------------------------------------------
# 生成器模拟
# ---------------------------------------------------------------------------

@dataclass
class GeneratorModel:
    """模拟的生成器快照

    memorization_rate 为每个样本复现训练图像的概率；fidelity_level 1 伪影最重，14 无伪影。
    """
    training_corpus: List[CorpusEntry]
    memorization_rate: float
    fidelity_level: int
    seed: int
    snapshot_id: int = 1
    prototype_seed: Optional[int] = None
    _leak_pool: List[CorpusEntry] = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.memorization_rate <= 1.0:
            raise SpecError(f"记忆率必须在 [0, 1] 内: {self.memorization_rate}")
        if not 1 <= self.fidelity_level <= MAX_FIDELITY:
            raise SpecError(f"保真度级别必须在 1..{MAX_FIDELITY} 内: {self.fidelity_level}")
        self._leak_pool = sorted((e for e in self.training_corpus if not e.mirrored),
                                 key=lambda e: e.sort_key())
        if self.prototype_seed is None:
            self.prototype_seed = derive_seed(self.seed, "prototype")

    @property
    def artifact_strength(self) -> float:
        return artifact_strength(self.fidelity_level)


def artifact_strength(level: int) -> float:
    """伪影强度随保真度级别线性下降：1 -> 1.0，14 -> 0.0"""
    if not 1 <= level <= MAX_FIDELITY:
        raise SpecError(f"保真度级别必须在 1..{MAX_FIDELITY} 内: {level}")
    return (MAX_FIDELITY - level) / (MAX_FIDELITY - 1)


def apply_fidelity(image: RawImage, level: int, seed: int = 0) -> RawImage:
    """按快照保真度退化图像：强平滑抹去细纹理，并叠加随机亮椭圆（“水泡”伪影）"""
    strength = artifact_strength(level)
    if strength == 0.0:
        return RawImage(image.pixels.copy())
    rng = np.random.default_rng(seed)
    canvas = ndimage.gaussian_filter(image.as_float(), sigma=6.0 * strength)

    height, width = canvas.shape
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    blobs = int(round(12 * strength))
    for _ in range(blobs):
        bx = rng.uniform(0.25 * width, 0.75 * width)
        by = rng.uniform(0.25 * height, 0.75 * height)
        sx, sy = rng.uniform(6.0, 16.0, size=2)
        angle = rng.uniform(0.0, math.pi)
        amplitude = rng.uniform(60.0, 110.0) * strength
        u = (xx - bx) * math.cos(angle) + (yy - by) * math.sin(angle)
        v = -(xx - bx) * math.sin(angle) + (yy - by) * math.cos(angle)
        canvas += amplitude * np.exp(-0.5 * ((u / sx) ** 2 + (v / sy) ** 2))
    return RawImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))


def planted_source(model: GeneratorModel, index: int) -> Optional[CorpusEntry]:
    """第 index 个样本若为植入泄露，返回其训练源条目

    是否泄露只取决于 (模型种子, 记忆率, index)。
    """
    rng = make_rng(model.seed, "leak", index)
    if not rng.random() < model.memorization_rate or not model._leak_pool:
        return None
    return model._leak_pool[int(rng.integers(len(model._leak_pool)))]


def sample_generator(model: GeneratorModel, index: int) -> CorpusEntry:
    """生成第 index 个合成样本（种子编号即 index）"""
    if not model.training_corpus:
        raise SpecError("生成器的训练语料为空")
    origin = Origin.synthetic(model.snapshot_id, index)
    source = planted_source(model, index)
    if source is not None:
        rng = make_rng(model.seed, "leak-noise", index)
        noisy = source.image.as_float() + rng.normal(0.0, LEAK_NOISE_SIGMA, source.image.pixels.shape)
        image = RawImage(np.clip(np.rint(noisy), 0, 255).astype(np.uint8))
        mask = source.mask
    else:
        rng = make_rng(model.seed, "sample", index)
        identity = random_identity(rng, derive_seed(model.seed, "fake-texture", index))
        capture = CaptureSpec(
            dilation_factor=float(rng.uniform(0.85, 1.3)),
            rotation=float(rng.uniform(-2.0, 2.0)),
            width=FAKE_SIZE,
            height=FAKE_SIZE,
            center=((FAKE_SIZE - 1) / 2.0 + float(rng.uniform(-3.0, 3.0)),
                    (FAKE_SIZE - 1) / 2.0 + float(rng.uniform(-3.0, 3.0))),
            noise_seed=derive_seed(model.seed, "fake-noise", index),
        )
        prototype = polar_texture(IdentitySpec(texture_seed=model.prototype_seed))
        rendered = render_iris(identity, capture, prototype, model.artifact_strength)
        image, mask = rendered.image, rendered.mask

    image = apply_fidelity(image, model.fidelity_level, derive_seed(model.seed, "fidelity", index))
    return CorpusEntry(image=image, identity="", frame_index=index, origin=origin, mask=mask)


def leak_ledger(model: GeneratorModel, count: int) -> List[Dict]:
    """前 count 个样本中植入泄露的真值账本"""
    ledger = []
    for index in range(count):
        source = planted_source(model, index)
        if source is None:
            continue
        ledger.append({
            "snapshot": model.snapshot_id,
            "seed": index,
            "fake_id": entry_id("", index, Origin.synthetic(model.snapshot_id, index)),
            "source_id": source.entry_id,
            "source_identity": source.identity,
            "source_frame": source.frame_index,
        })
    return ledger


def snapshot_fidelity(snapshot: int, snapshots: int = MAX_FIDELITY) -> int:
    """快照编号到保真度级别的线性映射（14 个快照时快照 i 即级别 i）"""
    if snapshots <= 1:
        return MAX_FIDELITY
    return int(round(1 + (snapshot - 1) * (MAX_FIDELITY - 1) / (snapshots - 1)))
