"""
分数分析
分布汇总、ROC/AUC、FAR阈值、泄露热力图、泄露标记、差异图、自由度估计与审计结论
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..models.imaging import RawImage
from ..models.report import (
    ScoreDistribution, RocCurve, FarThreshold, DofEstimate, ShiftStatistics,
    FlaggedPair, LeakageHeatmap, LeakageReport, Verdict,
    EMPTY_CELL, UNATTAINABLE_FAR,
)
from ..models.scores import Orientation, PairType, PairRecord
from ..utils.errors import (
    InsufficientData, OrientationError, DegenerateDistribution, DimensionMismatch,
)

logger = logging.getLogger(__name__)

DEFAULT_FAR_LEVELS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
DEFAULT_QUANTILES = (0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999)
DEFAULT_BINS = 100
MIN_SHIFT_SAMPLES = 100

FIRST_SNAPSHOT_ITERATION = 80_000
SNAPSHOT_ITERATION_STEP = 320_000


def _accepts(scores: np.ndarray, threshold: float, orientation: Orientation) -> np.ndarray:
    """阈值判决（含等号）：距离 ≤ t，相似度 ≥ t"""
    if orientation == Orientation.DISTANCE:
        return scores <= threshold
    return scores >= threshold


def _require_same_orientation(a: ScoreDistribution, b: ScoreDistribution):
    if a.orientation != b.orientation:
        raise OrientationError(f"分数方向不一致: {a.orientation.value} / {b.orientation.value}")


def summarize(scores: Iterable[float], pair_type: PairType, orientation: Orientation,
              bins: int = DEFAULT_BINS, quantiles: Sequence[float] = DEFAULT_QUANTILES) -> ScoreDistribution:
    """分布汇总：总体均值/标准差、线性插值分位数、[min, max] 等宽直方图"""
    values = np.sort(np.asarray(list(scores), dtype=np.float64))
    if values.size < 2:
        raise InsufficientData(f"{pair_type.value} 分数不足2个: {values.size}")
    counts, edges = np.histogram(values, bins=bins, range=(values[0], values[-1]))
    return ScoreDistribution(
        pair_type=pair_type,
        orientation=orientation,
        scores=values,
        mean=float(values.mean()),
        std=float(values.std()),
        quantiles={float(q): float(np.quantile(values, q)) for q in quantiles},
        bin_edges=edges,
        counts=counts,
    )


def roc(genuine: ScoreDistribution, impostor: ScoreDistribution) -> RocCurve:
    """ROC曲线，正类为真匹配；遍历所有不同分数值并加 ±∞ 哨兵，AUC 用梯形法"""
    _require_same_orientation(genuine, impostor)
    g, i = genuine.scores, impostor.scores
    distinct = np.unique(np.concatenate([g, i]))
    if genuine.orientation == Orientation.DISTANCE:
        thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])
        tpr = np.searchsorted(g, thresholds, side="right") / g.size
        fpr = np.searchsorted(i, thresholds, side="right") / i.size
    else:
        thresholds = np.concatenate([[np.inf], distinct[::-1], [-np.inf]])
        tpr = (g.size - np.searchsorted(g, thresholds, side="left")) / g.size
        fpr = (i.size - np.searchsorted(i, thresholds, side="left")) / i.size
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def equal_error_rate(genuine: ScoreDistribution, impostor: ScoreDistribution) -> Tuple[float, float]:
    """等错误率及其阈值：取 FNR 与 FPR 交叉处两侧中和更小的一点"""
    curve = roc(genuine, impostor)
    fnr = 1.0 - curve.tpr
    fpr = curve.fpr
    lower = np.flatnonzero(fnr <= fpr).min()
    upper = np.flatnonzero(fnr >= fpr).max()
    if fnr[lower] + fpr[lower] <= fnr[upper] + fpr[upper]:
        index = lower
    else:
        index = upper
    eer = float((fnr[index] + fpr[index]) / 2.0)
    return eer, float(curve.thresholds[index])


def decidability(genuine: ScoreDistribution, impostor: ScoreDistribution) -> float:
    """可分性指数 d'"""
    _require_same_orientation(genuine, impostor)
    pooled = math.sqrt((genuine.std ** 2 + impostor.std ** 2) / 2.0)
    if pooled == 0:
        raise DegenerateDistribution("两个分布的标准差均为0，d' 无定义")
    return abs(genuine.mean - impostor.mean) / pooled


def far_thresholds(impostor_rr: ScoreDistribution,
                   far_levels: Sequence[float] = DEFAULT_FAR_LEVELS) -> List[FarThreshold]:
    """由 R-R 冒名分布求各 FAR 级别的阈值

    距离取下尾分位数，相似度取上尾分位数；级别小于 1/n 时标记为不可达。
    """
    n = impostor_rr.count
    result = []
    for level in far_levels:
        if level < 1.0 / n:
            result.append(FarThreshold(level=level, threshold=None, attainable=False))
            continue
        q = level if impostor_rr.orientation == Orientation.DISTANCE else 1.0 - level
        result.append(FarThreshold(level=level, threshold=float(np.quantile(impostor_rr.scores, q))))
    return result


def strictest_attainable(thresholds: Sequence[FarThreshold]) -> Optional[FarThreshold]:
    attainable = [t for t in thresholds if t.attainable]
    return min(attainable, key=lambda t: t.level) if attainable else None


def leakage_heatmap(rf_scores: Mapping[int, Sequence[float]], thresholds: Sequence[FarThreshold],
                    orientation: Orientation) -> LeakageHeatmap:
    """泄露热力图：格子 = 100 · 超过阈值的 R-F 分数数 / 该快照 R-F 分数总数"""
    snapshots = sorted(rf_scores)
    cells, markers = [], []
    for threshold in thresholds:
        row, row_markers = [], []
        for snapshot in snapshots:
            values = np.asarray(rf_scores[snapshot], dtype=np.float64)
            if values.size == 0:
                row.append(None)
                row_markers.append(EMPTY_CELL)
            elif not threshold.attainable:
                row.append(None)
                row_markers.append(UNATTAINABLE_FAR)
            else:
                hits = int(np.count_nonzero(_accepts(values, threshold.threshold, orientation)))
                row.append(100.0 * hits / values.size)
                row_markers.append(None)
        cells.append(row)
        markers.append(row_markers)
    return LeakageHeatmap(
        far_levels=[t.level for t in thresholds],
        snapshots=snapshots,
        cells=cells,
        markers=markers,
    )


def flag_leaks(records: Iterable[PairRecord], threshold: float, orientation: Orientation,
               inclusive: bool = True) -> List[FlaggedPair]:
    """标记超过阈值的 R-F 配对（默认含等号），按超出幅度从大到小排序"""
    flagged = []
    for record in records:
        if not record.is_valid:
            continue
        value = record.score.value
        margin = threshold - value if orientation == Orientation.DISTANCE else value - threshold
        if margin > 0 or (inclusive and margin == 0):
            flagged.append(FlaggedPair(record.id_a, record.id_b, value, margin, record.score.best_shift))
    flagged.sort(key=lambda pair: (-pair.margin, pair.id_a, pair.id_b))
    return flagged


@dataclass
class DiffResult:
    """逐像素绝对差及汇总"""
    image: RawImage
    mean_abs: float
    max_abs: int

    def to_dict(self) -> Dict[str, float]:
        return {"mean_abs_diff": float(self.mean_abs), "max_abs_diff": int(self.max_abs)}


def diff_image(real: RawImage, fake: RawImage) -> DiffResult:
    """真实图像与合成图像的差异图"""
    if real.pixels.shape != fake.pixels.shape:
        raise DimensionMismatch(f"图像尺寸不一致: {real.pixels.shape} / {fake.pixels.shape}")
    diff = np.abs(real.pixels.astype(np.int16) - fake.pixels.astype(np.int16)).astype(np.uint8)
    return DiffResult(image=RawImage(diff), mean_abs=float(diff.mean()), max_abs=int(diff.max()))


def dof_from_moments(p: float, sigma: float) -> DofEstimate:
    """N = p(1-p)/σ²"""
    if sigma <= 0:
        raise DegenerateDistribution(f"标准差必须大于0: {sigma}")
    return DofEstimate(p=p, sigma=sigma, n_dof=p * (1.0 - p) / sigma ** 2)


def estimate_dof(impostor: ScoreDistribution) -> DofEstimate:
    """冒名分布的二项自由度；相似度分数先换算回距离"""
    p = impostor.mean if impostor.orientation == Orientation.DISTANCE else 1.0 - impostor.mean
    return dof_from_moments(p, impostor.std)


def distribution_shift(rr: ScoreDistribution, rf: ScoreDistribution) -> ShiftStatistics:
    """R-R 与 R-F 冒名分布的差异

    extreme_quantile_delta 为正表示 R-F 的极端尾部比 R-R 更靠近真匹配一侧
    （距离取 0.1% 分位数，相似度取 99.9% 分位数）。
    """
    _require_same_orientation(rr, rf)
    if rr.count < MIN_SHIFT_SAMPLES or rf.count < MIN_SHIFT_SAMPLES:
        raise InsufficientData(f"每侧至少需要 {MIN_SHIFT_SAMPLES} 个分数: {rr.count} / {rf.count}")
    ks = float(stats.ks_2samp(rr.scores, rf.scores).statistic)
    if rr.orientation == Orientation.DISTANCE:
        q = 0.001
        delta = float(np.quantile(rr.scores, q) - np.quantile(rf.scores, q))
    else:
        q = 0.999
        delta = float(np.quantile(rf.scores, q) - np.quantile(rr.scores, q))
    return ShiftStatistics(ks_statistic=ks, extreme_quantile_delta=delta, quantile=q)


def snapshot_iteration(snapshot: int) -> int:
    """快照编号对应的训练迭代次数"""
    return FIRST_SNAPSHOT_ITERATION + SNAPSHOT_ITERATION_STEP * (snapshot - 1)


def leak_attribution(flagged: Iterable[FlaggedPair], real_identities: Mapping[str, str],
                     frames_per_identity: Optional[Mapping[str, int]] = None) -> Dict[str, Dict[str, int]]:
    """按真实身份统计被标记的配对数及涉及的合成样本数，并附带该身份的训练帧数"""
    pairs: Dict[str, int] = {}
    fakes: Dict[str, set] = {}
    for pair in flagged:
        if pair.id_a in real_identities:
            identity, fake_id = real_identities[pair.id_a], pair.id_b
        elif pair.id_b in real_identities:
            identity, fake_id = real_identities[pair.id_b], pair.id_a
        else:
            continue
        pairs[identity] = pairs.get(identity, 0) + 1
        fakes.setdefault(identity, set()).add(fake_id)
    result = {}
    for identity in sorted(pairs):
        entry = {"flagged_pairs": pairs[identity], "flagged_fakes": len(fakes[identity])}
        if frames_per_identity is not None:
            entry["training_frames"] = int(frames_per_identity.get(identity, 0))
        result[identity] = entry
    return result


def leak_recall(flagged: Iterable[FlaggedPair], planted_fake_ids: Iterable[str]) -> Optional[float]:
    """已植入泄露样本中被标记出来的比例；没有植入样本时返回 None"""
    planted = set(planted_fake_ids)
    if not planted:
        return None
    hit = set()
    for pair in flagged:
        hit.add(pair.id_a)
        hit.add(pair.id_b)
    return len(planted & hit) / len(planted)


def binomial_allowance(n: int, far: float) -> int:
    """n 次独立冒名比对在 FAR 下误匹配数的 3σ 上界"""
    return int(math.floor(n * far + 3.0 * math.sqrt(n * far * (1.0 - far))))


def verdict(report: LeakageReport, rf_scores: Mapping[int, Sequence[float]], rule: str = "binomial") -> Verdict:
    """审计结论

    在最严格的可达 FAR 下统计每个快照的 R-F 标记数；
    any: 任一快照存在标记即判定泄露；binomial: 任一快照标记数超过 3σ 二项允许量即判定泄露。
    """
    if rule not in ("any", "binomial"):
        raise ValueError(f"未知的判定规则: {rule}")
    strictest = strictest_attainable(report.thresholds)
    if strictest is None:
        logger.warning("没有可达的 FAR 级别，无法给出泄露结论")
        return Verdict(leak=False, rule=rule, far=None)

    flags, allowances = {}, {}
    for snapshot in sorted(rf_scores):
        values = np.asarray(rf_scores[snapshot], dtype=np.float64)
        if values.size == 0:
            continue
        flags[snapshot] = int(np.count_nonzero(_accepts(values, strictest.threshold, report.orientation)))
        allowances[snapshot] = 0 if rule == "any" else binomial_allowance(values.size, strictest.level)
    leak = any(flags[s] > allowances[s] for s in flags)
    return Verdict(leak=leak, rule=rule, far=strictest.level, flags=flags, allowances=allowances)
