"""
虹膜模板数据模型
比特码、有效掩码、来源元数据以及 IRT1 二进制文件格式
"""

import json
import struct
from dataclasses import dataclass, field, asdict
from typing import Optional, Dict, Any

import numpy as np

from .corpus_data import Origin, OriginKind
from ..utils.errors import IrisAuditError, TemplateFormatError, DimensionMismatch

MAGIC = b"IRT1"
_HEADER = struct.Struct("<4sIII")
_LENGTH = struct.Struct("<I")


@dataclass
class TemplateMeta:
    """模板来源信息"""
    template_id: str
    identity: str
    origin: str = OriginKind.REAL_TRAINING.value
    frame: int = 0
    snapshot: Optional[int] = None
    seed: Optional[int] = None
    quality: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_real(self) -> bool:
        return self.origin == OriginKind.REAL_TRAINING.value

    @classmethod
    def from_origin(cls, template_id: str, identity: str, frame: int, origin: Origin,
                    quality: Optional[Dict[str, Any]] = None) -> "TemplateMeta":
        return cls(
            template_id=template_id,
            identity=identity,
            origin=origin.kind.value,
            frame=frame,
            snapshot=origin.snapshot_id,
            seed=origin.seed,
            quality=quality or {},
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TemplateMeta":
        return cls(
            template_id=data["template_id"],
            identity=data.get("identity", ""),
            origin=data.get("origin", OriginKind.REAL_TRAINING.value),
            frame=int(data.get("frame", 0)),
            snapshot=data.get("snapshot"),
            seed=data.get("seed"),
            quality=data.get("quality", {}),
        )


@dataclass
class IrisTemplate:
    """虹膜模板：code 与 mask 形状均为 (R', Θ, k)"""
    code: np.ndarray
    mask: np.ndarray
    meta: TemplateMeta

    def __post_init__(self):
        self.code = np.asarray(self.code, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.code.ndim != 3 or self.code.shape != self.mask.shape:
            raise DimensionMismatch(f"code 与 mask 形状必须一致且为三维: {self.code.shape} / {self.mask.shape}")

    @property
    def dims(self):
        """(R', Θ, k)"""
        return tuple(int(v) for v in self.code.shape)

    @property
    def bit_length(self) -> int:
        return int(self.code.size)

    @property
    def template_id(self) -> str:
        return self.meta.template_id

    def to_bytes(self) -> bytes:
        """序列化为 IRT1：魔数、u32 维度、LSB 优先的 code/mask 比特、带长度前缀的JSON元数据"""
        rows, cols, filters = self.dims
        code = np.packbits(self.code.ravel(), bitorder="little").tobytes()
        mask = np.packbits(self.mask.ravel(), bitorder="little").tobytes()
        meta = json.dumps(self.meta.to_dict(), ensure_ascii=False, sort_keys=True).encode("utf-8")
        return b"".join([_HEADER.pack(MAGIC, rows, cols, filters), code, mask, _LENGTH.pack(len(meta)), meta])

    @classmethod
    def from_bytes(cls, data: bytes) -> "IrisTemplate":
        """从 IRT1 字节解析"""
        if len(data) < _HEADER.size:
            raise TemplateFormatError("模板数据过短")
        magic, rows, cols, filters = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise TemplateFormatError(f"模板魔数错误: {magic!r}")
        bits = rows * cols * filters
        nbytes = (bits + 7) // 8
        offset = _HEADER.size
        if len(data) < offset + 2 * nbytes + _LENGTH.size:
            raise TemplateFormatError("模板数据被截断")

        def unpack(start):
            raw = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=start)
            return np.unpackbits(raw, count=bits, bitorder="little").astype(bool).reshape(rows, cols, filters)

        code = unpack(offset)
        mask = unpack(offset + nbytes)
        offset += 2 * nbytes
        (meta_len,) = _LENGTH.unpack_from(data, offset)
        offset += _LENGTH.size
        try:
            meta = TemplateMeta.from_dict(json.loads(data[offset:offset + meta_len].decode("utf-8")))
        except (ValueError, KeyError) as e:
            raise TemplateFormatError(f"模板元数据无法解析: {e}")
        return cls(code=code, mask=mask, meta=meta)

    def save(self, file_path: str):
        """写入模板文件"""
        try:
            with open(file_path, "wb") as f:
                f.write(self.to_bytes())
        except OSError as e:
            raise IrisAuditError(f"写入模板失败 {file_path}: {e}")

    @classmethod
    def load(cls, file_path: str) -> "IrisTemplate":
        """读取模板文件"""
        try:
            with open(file_path, "rb") as f:
                return cls.from_bytes(f.read())
        except OSError as e:
            raise IrisAuditError(f"读取模板失败 {file_path}: {e}")
