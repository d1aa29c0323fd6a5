"""
比对分数数据模型
分数方向、配对类型、单次比对结果以及分数表CSV读写
"""

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Optional, List, Iterator, Dict

from ..utils.errors import IrisAuditError

CSV_HEADER = ["id_a", "id_b", "pair_type", "orientation", "score", "best_shift", "overlap", "status"]


class Orientation(Enum):
    """分数方向：距离越小越相似 / 相似度越大越相似"""
    DISTANCE = "distance"
    SIMILARITY = "similarity"

    @classmethod
    def parse(cls, value: str) -> "Orientation":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"未知的分数方向: {value}")


class PairType(Enum):
    """四种配对类型"""
    GENUINE = "Genuine"
    IMPOSTOR_RR = "ImpostorRR"
    IMPOSTOR_RF = "ImpostorRF"
    IMPOSTOR_FF = "ImpostorFF"

    @property
    def slug(self) -> str:
        return {
            PairType.GENUINE: "genuine",
            PairType.IMPOSTOR_RR: "impostor_rr",
            PairType.IMPOSTOR_RF: "impostor_rf",
            PairType.IMPOSTOR_FF: "impostor_ff",
        }[self]


class ScoreStatus(Enum):
    """单条记录状态"""
    OK = "ok"
    INSUFFICIENT_OVERLAP = "insufficient_overlap"


@dataclass(frozen=True)
class MatchScore:
    """一次比对的分数"""
    value: float
    orientation: Orientation
    best_shift: int
    overlap: int


@dataclass(frozen=True)
class PairRecord:
    """分数表中的一行"""
    id_a: str
    id_b: str
    pair_type: PairType
    score: Optional[MatchScore]
    status: ScoreStatus = ScoreStatus.OK
    overlap: int = 0

    @property
    def is_valid(self) -> bool:
        return self.status == ScoreStatus.OK and self.score is not None

    def sort_key(self):
        return (self.id_a, self.id_b)

    def to_row(self) -> List[str]:
        if self.is_valid:
            return [
                self.id_a, self.id_b, self.pair_type.value, self.score.orientation.value,
                f"{self.score.value:.6f}", str(self.score.best_shift), str(self.score.overlap),
                self.status.value,
            ]
        return [self.id_a, self.id_b, self.pair_type.value, "", "", "", str(self.overlap), self.status.value]

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "PairRecord":
        status = ScoreStatus(row["status"])
        pair_type = PairType(row["pair_type"])
        if status == ScoreStatus.OK:
            score = MatchScore(
                value=float(row["score"]),
                orientation=Orientation.parse(row["orientation"]),
                best_shift=int(row["best_shift"]),
                overlap=int(row["overlap"]),
            )
            return cls(row["id_a"], row["id_b"], pair_type, score, status, score.overlap)
        return cls(row["id_a"], row["id_b"], pair_type, None, status, int(row["overlap"] or 0))


class ScoreTable:
    """分数表容器类"""

    def __init__(self, records: Optional[List[PairRecord]] = None):
        self.records: List[PairRecord] = list(records or [])

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PairRecord]:
        return iter(self.records)

    def sort(self):
        """按 (id_a, id_b) 字典序排序"""
        self.records.sort(key=lambda record: record.sort_key())

    def of_type(self, pair_type: PairType) -> "ScoreTable":
        """筛选指定配对类型"""
        return ScoreTable([r for r in self.records if r.pair_type == pair_type])

    def values(self) -> List[float]:
        """所有有效分数值"""
        return [r.score.value for r in self.records if r.is_valid]

    def valid_records(self) -> List[PairRecord]:
        return [r for r in self.records if r.is_valid]

    def counts(self) -> Dict[str, int]:
        """各状态计数"""
        result = {status.value: 0 for status in ScoreStatus}
        for record in self.records:
            result[record.status.value] += 1
        return result

    def save_to_file(self, file_path: str):
        """写出CSV（6位小数，\\n 换行）"""
        self.sort()
        try:
            with open(file_path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(CSV_HEADER)
                for record in self.records:
                    writer.writerow(record.to_row())
        except OSError as e:
            raise IrisAuditError(f"写入分数表失败 {file_path}: {e}")

    @classmethod
    def load_from_file(cls, file_path: str) -> "ScoreTable":
        """读取CSV"""
        try:
            with open(file_path, "r", encoding="utf-8", newline="") as f:
                reader = csv.DictReader(f)
                if reader.fieldnames != CSV_HEADER:
                    raise IrisAuditError(f"分数表表头不匹配 {file_path}: {reader.fieldnames}")
                return cls([PairRecord.from_row(row) for row in reader])
        except OSError as e:
            raise IrisAuditError(f"读取分数表失败 {file_path}: {e}")
