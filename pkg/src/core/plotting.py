"""
报告图表
分数分布直方图、ROC曲线、泄露热力图（SVG）以及证据三联图（PNG）
"""

import logging
from typing import Dict, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from ..models.imaging import RawImage  # noqa: E402
from ..models.report import ScoreDistribution, RocCurve, LeakageHeatmap, far_label  # noqa: E402
from ..models.scores import PairType  # noqa: E402
from ..utils.errors import IrisAuditError  # noqa: E402

logger = logging.getLogger(__name__)

PLOT_PARAMS = {
    "svg.hashsalt": "iris-leak-audit",
    "svg.fonttype": "path",
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "figure.figsize": [6.4, 4.0],
}

PAIR_COLORS = {
    PairType.GENUINE: "#2b8cbe",
    PairType.IMPOSTOR_RR: "#7bccc4",
    PairType.IMPOSTOR_RF: "#e34a33",
    PairType.IMPOSTOR_FF: "#fdbb84",
}

EVIDENCE_GAP = 4


def _save(fig, path: str):
    # 去掉时间戳，保证重复运行输出相同
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"已写出图表: {path}")


def plot_distributions(distributions: Dict[str, ScoreDistribution], path: str, title: str = ""):
    """四类分布叠加的归一化直方图"""
    with plt.rc_context(PLOT_PARAMS):
        fig, ax = plt.subplots()
        for dist in sorted(distributions.values(), key=lambda d: d.pair_type.value):
            widths = np.diff(dist.bin_edges)
            density = dist.counts / (dist.count * np.where(widths > 0, widths, 1.0))
            ax.stairs(density, dist.bin_edges, label=f"{dist.pair_type.value} (n={dist.count})",
                      color=PAIR_COLORS[dist.pair_type])
        orientation = next(iter(distributions.values())).orientation.value if distributions else ""
        ax.set_xlabel(f"score ({orientation})")
        ax.set_ylabel("density")
        if title:
            ax.set_title(title)
        if distributions:
            ax.legend(loc="best")
        _save(fig, path)


def plot_roc(curves: Dict[str, RocCurve], path: str, title: str = ""):
    """ROC曲线，对数 FPR 轴"""
    with plt.rc_context(PLOT_PARAMS):
        fig, ax = plt.subplots()
        for label, curve in sorted(curves.items()):
            fpr = np.clip(curve.fpr, 1e-7, 1.0)
            ax.plot(fpr, curve.tpr, label=f"{label} (AUC={curve.auc:.4f})")
        ax.set_xscale("log")
        ax.set_xlim(1e-7, 1.0)
        ax.set_ylim(0.0, 1.02)
        ax.set_xlabel("FPR")
        ax.set_ylabel("TPR")
        if title:
            ax.set_title(title)
        if curves:
            ax.legend(loc="lower right")
        _save(fig, path)


def plot_heatmap(heatmap: LeakageHeatmap, path: str, title: str = ""):
    """FAR × 快照 的误匹配百分比热力图，不可计算的格子留白"""
    values = np.array([[np.nan if v is None else v for v in row] for row in heatmap.cells], dtype=float)
    with plt.rc_context(PLOT_PARAMS):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(heatmap.snapshots) + 2.0), 3.2))
        image = ax.imshow(np.ma.masked_invalid(values), cmap="Reds", vmin=0.0, aspect="auto")
        ax.set_xticks(range(len(heatmap.snapshots)), [str(s) for s in heatmap.snapshots])
        ax.set_yticks(range(len(heatmap.far_levels)), [far_label(level) for level in heatmap.far_levels])
        ax.set_xlabel("snapshot")
        ax.set_ylabel("FAR")
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                if np.isfinite(values[i, j]):
                    ax.text(j, i, f"{values[i, j]:.1f}", ha="center", va="center", fontsize=6)
        fig.colorbar(image, ax=ax, label="% of R-F pairs")
        if title:
            ax.set_title(title)
        _save(fig, path)


def save_evidence(real: RawImage, fake: RawImage, diff: Optional[RawImage], path: str):
    """真实 | 合成 | 差异 三联图（尺寸不一致时省略差异图）"""
    panels = [real.pixels, fake.pixels] + ([diff.pixels] if diff is not None else [])
    height = max(p.shape[0] for p in panels)
    width = sum(p.shape[1] for p in panels) + EVIDENCE_GAP * (len(panels) - 1)
    canvas = np.full((height, width), 255, dtype=np.uint8)
    x = 0
    for panel in panels:
        canvas[:panel.shape[0], x:x + panel.shape[1]] = panel
        x += panel.shape[1] + EVIDENCE_GAP
    try:
        Image.fromarray(canvas).save(path, format="PNG")
    except OSError as e:
        raise IrisAuditError(f"无法写入证据图 {path}: {e}")
