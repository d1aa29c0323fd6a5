"""
语料数据模型类
用于表示语料条目、来源信息以及清单文件的读写
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, List, Dict, Any, Iterator
import json
import os

from .imaging import RawImage, SegMask
from ..utils.encoding_utils import EncodingUtils
from ..utils.errors import IrisAuditError


class OriginKind(Enum):
    """来源类型"""
    REAL_TRAINING = "RealTraining"
    SYNTHETIC = "Synthetic"


@dataclass(frozen=True)
class Origin:
    """样本来源：真实训练样本或某个快照生成的合成样本"""
    kind: OriginKind
    snapshot_id: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind == OriginKind.SYNTHETIC:
            if self.snapshot_id is None or self.snapshot_id < 1 or self.seed is None:
                raise ValueError(f"合成样本必须带有快照编号(>=1)和种子: {self.snapshot_id}, {self.seed}")

    @property
    def is_real(self) -> bool:
        return self.kind == OriginKind.REAL_TRAINING

    @classmethod
    def real(cls) -> "Origin":
        return cls(OriginKind.REAL_TRAINING)

    @classmethod
    def synthetic(cls, snapshot_id: int, seed: int) -> "Origin":
        return cls(OriginKind.SYNTHETIC, snapshot_id, seed)


def entry_id(identity: str, frame_index: int, origin: Origin, mirrored: bool = False) -> str:
    """生成条目/模板的唯一标识，字典序与 (identity, frame, mirrored) 一致"""
    if origin.is_real:
        base = f"{identity}_f{frame_index:05d}"
    else:
        base = f"s{origin.snapshot_id:02d}_seed{origin.seed:04d}"
    return base + ("_m" if mirrored else "")


@dataclass
class CorpusEntry:
    """内存中的语料条目"""
    image: RawImage
    identity: str
    frame_index: int
    origin: Origin
    mask: Optional[SegMask] = None
    mirrored: bool = False

    def __post_init__(self):
        if self.origin.is_real and not self.identity:
            raise ValueError("真实训练样本的身份标签不能为空")
        if self.mask is not None and not self.mask.matches(self.image):
            raise ValueError("掩码尺寸与图像不一致")

    @property
    def entry_id(self) -> str:
        return entry_id(self.identity, self.frame_index, self.origin, self.mirrored)

    def sort_key(self):
        return (self.identity, self.frame_index, self.mirrored)


@dataclass
class ManifestRecord:
    """清单中的单条记录"""
    path: str
    identity: str
    frame: int
    origin: str = OriginKind.REAL_TRAINING.value
    mask_path: Optional[str] = None
    snapshot: Optional[int] = None
    seed: Optional[int] = None
    mirrored: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def origin_info(self) -> Origin:
        if self.origin == OriginKind.SYNTHETIC.value:
            return Origin.synthetic(int(self.snapshot), int(self.seed))
        return Origin.real()

    @property
    def entry_id(self) -> str:
        return entry_id(self.identity, self.frame, self.origin_info, self.mirrored)

    def sort_key(self):
        return (self.identity, self.frame, self.mirrored)

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        result = {
            "path": self.path,
            "mask_path": self.mask_path,
            "identity": self.identity,
            "frame": self.frame,
            "origin": self.origin,
            "snapshot": self.snapshot,
            "seed": self.seed,
            "mirrored": self.mirrored,
        }
        if self.extra:
            result["extra"] = self.extra
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ManifestRecord":
        """从字典创建实例"""
        return cls(
            path=data["path"],
            identity=data.get("identity", ""),
            frame=int(data.get("frame", 0)),
            origin=data.get("origin", OriginKind.REAL_TRAINING.value),
            mask_path=data.get("mask_path"),
            snapshot=data.get("snapshot"),
            seed=data.get("seed"),
            mirrored=bool(data.get("mirrored", False)),
            extra=data.get("extra", {}),
        )


class CorpusManifest:
    """清单容器类，每行一条JSON记录"""

    def __init__(self, base_dir: str = "."):
        self.base_dir = base_dir
        self.records: List[ManifestRecord] = []

    def add_record(self, record: ManifestRecord):
        """添加记录"""
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> ManifestRecord:
        return self.records[index]

    def __iter__(self) -> Iterator[ManifestRecord]:
        return iter(self.records)

    def sort(self):
        """按 (identity, frame, mirrored) 排序，保证输出确定"""
        self.records.sort(key=lambda record: record.sort_key())

    def resolve(self, relative_path: Optional[str]) -> Optional[str]:
        """将记录中的相对路径解析为绝对路径"""
        if relative_path is None:
            return None
        return os.path.join(self.base_dir, relative_path)

    def save_to_file(self, file_path: str):
        """保存到JSON-lines文件（写入前排序）"""
        self.sort()
        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            for record in self.records:
                f.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def load_from_file(cls, file_path: str) -> "CorpusManifest":
        """从JSON-lines文件加载"""
        content, _ = EncodingUtils.read_file_with_encoding(file_path)
        manifest = cls(os.path.dirname(os.path.abspath(file_path)))
        for line_number, line in enumerate(content.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                manifest.records.append(ManifestRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError) as e:
                raise IrisAuditError(f"清单第 {line_number} 行无法解析 {file_path}: {e}")
        return manifest
