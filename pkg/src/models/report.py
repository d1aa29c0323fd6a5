"""
分析报告数据模型
分数分布、ROC曲线、FAR阈值、泄露热力图、标记配对以及报告JSON
"""

import json
from dataclasses import dataclass, field
from typing import Optional, List, Dict, Any

import numpy as np

from .scores import Orientation, PairType
from ..utils.errors import IrisAuditError

EMPTY_CELL = "EmptyCell"
UNATTAINABLE_FAR = "UnattainableFar"


def far_label(level: float) -> str:
    """FAR 级别的统一文本形式，如 1e-03"""
    return f"{level:.0e}"


@dataclass
class ScoreDistribution:
    """单一配对类型的分数分布"""
    pair_type: PairType
    orientation: Orientation
    scores: np.ndarray
    mean: float
    std: float
    quantiles: Dict[float, float]
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def count(self) -> int:
        return int(self.scores.size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair_type": self.pair_type.value,
            "orientation": self.orientation.value,
            "count": self.count,
            "mean": float(self.mean),
            "std": float(self.std),
            "min": float(self.scores[0]),
            "max": float(self.scores[-1]),
            "quantiles": {f"{q:g}": float(v) for q, v in sorted(self.quantiles.items())},
            "histogram": {
                "edges": [float(e) for e in self.bin_edges],
                "counts": [int(c) for c in self.counts],
            },
        }


@dataclass
class RocCurve:
    """ROC曲线：点按 FPR 升序，首尾为 (0,0) 与 (1,1)"""
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def points(self) -> List[tuple]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_dict(self, max_points: int = 201) -> Dict[str, Any]:
        """写入报告时对曲线等间隔抽稀，保留首尾两点"""
        n = self.fpr.size
        if n > max_points:
            index = np.unique(np.linspace(0, n - 1, max_points).round().astype(int))
        else:
            index = np.arange(n)
        return {
            "auc": float(self.auc),
            "points": [[float(self.fpr[i]), float(self.tpr[i])] for i in index],
        }


@dataclass(frozen=True)
class FarThreshold:
    """FAR 级别对应的阈值；样本不足时 attainable 为 False"""
    level: float
    threshold: Optional[float]
    attainable: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "far": far_label(self.level),
            "threshold": None if self.threshold is None else float(self.threshold),
            "status": "ok" if self.attainable else UNATTAINABLE_FAR,
        }


@dataclass(frozen=True)
class DofEstimate:
    """二项分布自由度估计"""
    p: float
    sigma: float
    n_dof: float

    def to_dict(self) -> Dict[str, Any]:
        return {"p": float(self.p), "sigma": float(self.sigma), "n_dof": float(self.n_dof)}


@dataclass(frozen=True)
class ShiftStatistics:
    """R-R 与 R-F 分布差异：KS统计量以及偏向真匹配一侧的极端分位数差"""
    ks_statistic: float
    extreme_quantile_delta: float
    quantile: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ks_statistic": float(self.ks_statistic),
            "extreme_quantile_delta": float(self.extreme_quantile_delta),
            "quantile": float(self.quantile),
        }


@dataclass
class FlaggedPair:
    """超过阈值的 R-F 配对"""
    id_a: str
    id_b: str
    score: float
    margin: float
    best_shift: int = 0
    evidence: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        result = {
            "id_a": self.id_a,
            "id_b": self.id_b,
            "score": float(self.score),
            "margin": float(self.margin),
            "best_shift": int(self.best_shift),
        }
        if self.evidence:
            result["evidence"] = self.evidence
        return result


@dataclass
class LeakageHeatmap:
    """FAR 级别(行) × 快照(列) 的 R-F 误匹配百分比；无法计算的格子为 None 并带标记"""
    far_levels: List[float]
    snapshots: List[int]
    cells: List[List[Optional[float]]]
    markers: List[List[Optional[str]]]

    def cell(self, level: float, snapshot: int) -> Optional[float]:
        return self.cells[self.far_levels.index(level)][self.snapshots.index(snapshot)]

    def marker(self, level: float, snapshot: int) -> Optional[str]:
        return self.markers[self.far_levels.index(level)][self.snapshots.index(snapshot)]

    def column(self, snapshot: int) -> Dict[str, Any]:
        """单个快照的一列，键为 FAR 文本"""
        j = self.snapshots.index(snapshot)
        result = {}
        for i, level in enumerate(self.far_levels):
            value = self.cells[i][j]
            result[far_label(level)] = value if value is not None else self.markers[i][j]
        return result

    def to_rows(self) -> List[List[str]]:
        rows = [["far"] + [f"snapshot_{s:02d}" for s in self.snapshots]]
        for i, level in enumerate(self.far_levels):
            row = [far_label(level)]
            for j in range(len(self.snapshots)):
                value = self.cells[i][j]
                row.append(f"{value:.4f}" if value is not None else self.markers[i][j])
            rows.append(row)
        return rows


@dataclass
class SnapshotReport:
    """单个快照的分析结果"""
    snapshot: int
    iteration: int
    rf_count: int = 0
    distributions: Dict[str, ScoreDistribution] = field(default_factory=dict)
    roc: Optional[RocCurve] = None
    heatmap_row: Dict[str, Any] = field(default_factory=dict)
    flagged_pairs: List[FlaggedPair] = field(default_factory=list)
    dof: Optional[DofEstimate] = None
    shift: Optional[ShiftStatistics] = None
    leak_recall: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        result = {
            "snapshot": self.snapshot,
            "iteration": self.iteration,
            "rf_count": self.rf_count,
            "distributions": {key: dist.to_dict() for key, dist in sorted(self.distributions.items())},
            "roc": self.roc.to_dict() if self.roc else None,
            "heatmap_row": self.heatmap_row,
            "flagged_pairs": [pair.to_dict() for pair in self.flagged_pairs],
            "dof": self.dof.to_dict() if self.dof else None,
            "distribution_shift": self.shift.to_dict() if self.shift else None,
            "notes": list(self.notes),
        }
        if self.leak_recall is not None:
            result["leak_recall"] = float(self.leak_recall)
        return result


@dataclass
class Verdict:
    """审计结论：在最严格可达 FAR 下是否存在泄露"""
    leak: bool
    rule: str
    far: Optional[float]
    flags: Dict[int, int] = field(default_factory=dict)
    allowances: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "leak": self.leak,
            "rule": self.rule,
            "far": None if self.far is None else far_label(self.far),
            "flags": {f"{s:02d}": n for s, n in sorted(self.flags.items())},
            "allowances": {f"{s:02d}": n for s, n in sorted(self.allowances.items())},
        }


@dataclass
class LeakageReport:
    """一次运行的完整报告"""
    orientation: Orientation
    thresholds: List[FarThreshold] = field(default_factory=list)
    flag_far: Optional[float] = None
    baseline: Dict[str, ScoreDistribution] = field(default_factory=dict)
    baseline_roc: Optional[RocCurve] = None
    equal_error_rate: Optional[Dict[str, float]] = None
    decidability: Optional[float] = None
    dof: Optional[DofEstimate] = None
    heatmap: Optional[LeakageHeatmap] = None
    snapshots: List[SnapshotReport] = field(default_factory=list)
    attribution: Dict[str, Dict[str, int]] = field(default_factory=dict)
    extraction: Dict[str, Any] = field(default_factory=dict)
    verdict: Optional[Verdict] = None

    def snapshot(self, snapshot_id: int) -> Optional[SnapshotReport]:
        for item in self.snapshots:
            if item.snapshot == snapshot_id:
                return item
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orientation": self.orientation.value,
            "far_thresholds": [t.to_dict() for t in self.thresholds],
            "flag_far": None if self.flag_far is None else far_label(self.flag_far),
            "baseline": {
                "distributions": {key: dist.to_dict() for key, dist in sorted(self.baseline.items())},
                "roc": self.baseline_roc.to_dict() if self.baseline_roc else None,
                "equal_error_rate": self.equal_error_rate,
                "decidability": self.decidability,
                "dof": self.dof.to_dict() if self.dof else None,
            },
            "heatmap": self.heatmap.to_rows() if self.heatmap else None,
            "snapshots": [item.to_dict() for item in self.snapshots],
            "leak_attribution": self.attribution,
            "extraction": self.extraction,
            "verdict": self.verdict.to_dict() if self.verdict else None,
        }

    def save_to_file(self, file_path: str):
        """写出报告JSON（键排序，输出可逐字节复现）"""
        try:
            with open(file_path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(self.to_dict(), f, ensure_ascii=False, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise IrisAuditError(f"写入报告失败 {file_path}: {e}")
