"""
模板比对
带旋转补偿的掩码分数汉明距离、分数方向转换以及全配对比对引擎
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.scores import MatchScore, Orientation, PairType, PairRecord, ScoreStatus, ScoreTable
from ..models.template import IrisTemplate, TemplateMeta
from ..utils.errors import DimensionMismatch, InsufficientOverlap
from ..utils.parallel import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_MIN_OVERLAP = 1024
_BLOCK = 256


@dataclass(frozen=True)
class ShiftRange:
    """对称的角度平移范围 -max..+max（列）"""
    max_shift: int = 8

    def __post_init__(self):
        if self.max_shift < 0:
            raise ValueError(f"max_shift 不能为负: {self.max_shift}")

    def validate_for(self, angular_res: int):
        if self.max_shift >= angular_res / 2:
            raise ValueError(f"max_shift {self.max_shift} 必须小于 Θ/2 = {angular_res / 2}")

    def ordered(self) -> List[int]:
        """按平局规则排序：绝对值小者优先，同绝对值负方向优先"""
        shifts = [0]
        for step in range(1, self.max_shift + 1):
            shifts.extend([-step, step])
        return shifts


@dataclass(frozen=True)
class PackedTemplate:
    """按角度列打包的模板：code/mask 形状为 (Θ, W) 的 uint64，列循环平移即按行 roll"""
    template_id: str
    code: np.ndarray
    mask: np.ndarray
    dims: Tuple[int, int, int]
    meta: TemplateMeta


def _pack_columns(bits: np.ndarray) -> np.ndarray:
    """(R', Θ, k) 布尔数组 -> (Θ, W) uint64，每列 R'·k 位，不足64位补0"""
    rows, cols, filters = bits.shape
    per_column = bits.transpose(1, 0, 2).reshape(cols, rows * filters)
    words = (rows * filters + 63) // 64
    padded = np.zeros((cols, words * 64), dtype=bool)
    padded[:, :rows * filters] = per_column
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8")


def pack(template: Union[IrisTemplate, PackedTemplate]) -> PackedTemplate:
    """打包模板（已打包则原样返回）"""
    if isinstance(template, PackedTemplate):
        return template
    code = template.code & template.mask
    return PackedTemplate(
        template_id=template.template_id,
        code=_pack_columns(code),
        mask=_pack_columns(template.mask),
        dims=template.dims,
        meta=template.meta,
    )


def _shift_counts(a_code: np.ndarray, a_mask: np.ndarray, b_codes: np.ndarray, b_masks: np.ndarray,
                  shifts: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """对一批模板计算各平移下的不一致位数和重叠位数

    B 平移 c 列与 A 平移 -c 列的计数相同，因此只平移单个 A。
    """
    n = b_codes.shape[0]
    diffs = np.empty((n, len(shifts)), dtype=np.int64)
    overlaps = np.empty((n, len(shifts)), dtype=np.int64)
    for j, c in enumerate(shifts):
        a_code_c = np.roll(a_code, -c, axis=0)
        a_mask_c = np.roll(a_mask, -c, axis=0)
        both = b_masks & a_mask_c
        overlaps[:, j] = np.bitwise_count(both).sum(axis=(1, 2), dtype=np.int64)
        diffs[:, j] = np.bitwise_count((b_codes ^ a_code_c) & both).sum(axis=(1, 2), dtype=np.int64)
    return diffs, overlaps


def _select(diffs: np.ndarray, overlaps: np.ndarray, shifts: Sequence[int], min_overlap: int,
            normalization_bits: Optional[int]):
    """取各平移中的最小距离；首个最小值即符合平局规则"""
    ok = overlaps >= min_overlap
    hd = np.full(diffs.shape, np.inf)
    np.divide(diffs, overlaps, out=hd, where=ok)
    if normalization_bits:
        scale = np.sqrt(overlaps / float(normalization_bits))
        hd = np.where(ok, np.clip(0.5 - (0.5 - hd) * scale, 0.0, 1.0), np.inf)
    best = np.argmin(hd, axis=1)
    rows = np.arange(hd.shape[0])
    values = hd[rows, best]
    valid = np.isfinite(values)
    best_shift = np.asarray(shifts)[best]
    best_overlap = overlaps[rows, best]
    max_overlap = overlaps.max(axis=1)
    return values, best_shift, best_overlap, valid, max_overlap


def _check_dims(a: PackedTemplate, b: PackedTemplate):
    if a.dims != b.dims:
        raise DimensionMismatch(f"模板维度不一致: {a.template_id} {a.dims} / {b.template_id} {b.dims}")


def fractional_hd(a: Union[IrisTemplate, PackedTemplate], b: Union[IrisTemplate, PackedTemplate],
                  shifts: ShiftRange = ShiftRange(), min_overlap: int = DEFAULT_MIN_OVERLAP,
                  normalization_bits: Optional[int] = None) -> MatchScore:
    """掩码分数汉明距离，在 -max..+max 循环角度平移中取最小值"""
    pa, pb = pack(a), pack(b)
    _check_dims(pa, pb)
    shifts.validate_for(pa.dims[1])
    order = shifts.ordered()
    diffs, overlaps = _shift_counts(pa.code, pa.mask, pb.code[None], pb.mask[None], order)
    values, best_shift, best_overlap, valid, max_overlap = _select(
        diffs, overlaps, order, min_overlap, normalization_bits)
    if not valid[0]:
        raise InsufficientOverlap(
            f"{pa.template_id} / {pb.template_id}: 最大重叠 {int(max_overlap[0])} 位，低于下限 {min_overlap}")
    return MatchScore(float(values[0]), Orientation.DISTANCE, int(best_shift[0]), int(best_overlap[0]))


def orient(score: MatchScore, target: Orientation) -> MatchScore:
    """转换分数方向：距离 v <-> 相似度 1-v"""
    if score.orientation == target:
        return score
    return MatchScore(1.0 - score.value, target, score.best_shift, score.overlap)


def classify_pair(meta_a: TemplateMeta, meta_b: TemplateMeta) -> PairType:
    """根据来源判定配对类型"""
    if meta_a.is_real and meta_b.is_real:
        return PairType.GENUINE if meta_a.identity == meta_b.identity else PairType.IMPOSTOR_RR
    if meta_a.is_real or meta_b.is_real:
        return PairType.IMPOSTOR_RF
    return PairType.IMPOSTOR_FF


# ---------------------------------------------------------------------------
# 全配对引擎
# ---------------------------------------------------------------------------

@dataclass
class _Side:
    ids: List[str]
    metas: List[TemplateMeta]
    codes: np.ndarray
    masks: np.ndarray


_WORKER_STATE = {}


def _stack(templates: Sequence[PackedTemplate]) -> _Side:
    return _Side(
        ids=[t.template_id for t in templates],
        metas=[t.meta for t in templates],
        codes=np.stack([t.code for t in templates]) if templates else np.empty((0, 0, 0), np.uint64),
        masks=np.stack([t.mask for t in templates]) if templates else np.empty((0, 0, 0), np.uint64),
    )


def _init_worker(state: dict):
    _WORKER_STATE.clear()
    _WORKER_STATE.update(state)


def _score_row(i: int) -> List[tuple]:
    """A 中第 i 个模板与 B（自比对时为 i 之后的模板）的全部比对"""
    state = _WORKER_STATE
    side_a, side_b = state["a"], state["b"]
    start = i + 1 if state["self"] else 0
    rows = []
    for lo in range(start, len(side_b.ids), _BLOCK):
        hi = min(lo + _BLOCK, len(side_b.ids))
        diffs, overlaps = _shift_counts(side_a.codes[i], side_a.masks[i],
                                        side_b.codes[lo:hi], side_b.masks[lo:hi], state["shifts"])
        values, best_shift, best_overlap, valid, max_overlap = _select(
            diffs, overlaps, state["shifts"], state["min_overlap"], state["normalization_bits"])
        for k in range(hi - lo):
            j = lo + k
            rows.append((j, bool(valid[k]), float(values[k]), int(best_shift[k]),
                         int(best_overlap[k]), int(max_overlap[k])))
    return rows


def all_pairs(set_a: Sequence[Union[IrisTemplate, PackedTemplate]],
              set_b: Optional[Sequence[Union[IrisTemplate, PackedTemplate]]] = None,
              shifts: ShiftRange = ShiftRange(), min_overlap: int = DEFAULT_MIN_OVERLAP,
              orientation: Orientation = Orientation.DISTANCE, workers: int = 1,
              normalization_bits: Optional[int] = None) -> ScoreTable:
    """全配对比对

    set_b 为 None（或与 set_a 为同一对象）时输出 n(n-1)/2 个无序对，否则输出 |A|·|B| 条记录。
    单对错误以记录形式保留，不中断整批；输出按 (id_a, id_b) 排序，与调度无关。
    """
    is_self = set_b is None or set_b is set_a
    packed_a = sorted((pack(t) for t in set_a), key=lambda t: t.template_id)
    packed_b = packed_a if is_self else sorted((pack(t) for t in set_b), key=lambda t: t.template_id)
    if not packed_a or not packed_b:
        return ScoreTable()

    reference = packed_a[0]
    for template in list(packed_a) + ([] if is_self else list(packed_b)):
        _check_dims(reference, template)
    shifts.validate_for(reference.dims[1])

    side_a = _stack(packed_a)
    side_b = side_a if is_self else _stack(packed_b)
    state = {
        "a": side_a,
        "b": side_b,
        "self": is_self,
        "shifts": shifts.ordered(),
        "min_overlap": min_overlap,
        "normalization_bits": normalization_bits,
    }
    total = len(packed_a) * (len(packed_a) - 1) // 2 if is_self else len(packed_a) * len(packed_b)
    logger.info(f"开始全配对比对: {total} 对，{workers} 个进程")

    results = parallel_map(_score_row, range(len(packed_a)), workers,
                           initializer=_init_worker, initargs=(state,))

    records = []
    for i, rows in enumerate(results):
        meta_a = side_a.metas[i]
        for j, valid, value, best_shift, overlap, max_overlap in rows:
            meta_b = side_b.metas[j]
            pair_type = classify_pair(meta_a, meta_b)
            if valid:
                score = orient(MatchScore(value, Orientation.DISTANCE, best_shift, overlap), orientation)
                records.append(PairRecord(side_a.ids[i], side_b.ids[j], pair_type, score,
                                          ScoreStatus.OK, overlap))
            else:
                records.append(PairRecord(side_a.ids[i], side_b.ids[j], pair_type, None,
                                          ScoreStatus.INSUFFICIENT_OVERLAP, max_overlap))
    table = ScoreTable(records)
    table.sort()
    counts = table.counts()
    logger.info(f"比对完成: 有效 {counts['ok']}，重叠不足 {counts['insufficient_overlap']}")
    return table
