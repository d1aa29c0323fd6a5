"""
运行配置数据模型类
默认配置与用户配置两级加载，提供带类型的参数访问
"""

import configparser
import os
from typing import Dict, List, Optional

from ..utils.encoding_utils import EncodingUtils
from ..utils.seeding import derive_seed

DEFAULT_CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
                                  "config")


class RunConfig:
    """运行配置管理类"""

    def __init__(self, config_path: Optional[str] = None, config_dir: str = DEFAULT_CONFIG_DIR):
        self.config_dir = config_dir
        self.default_config_path = os.path.join(config_dir, "default_config.ini")
        self.user_config_path = config_path
        self.config = configparser.ConfigParser(inline_comment_prefixes=(";",))
        self._overrides: Dict[str, str] = {}
        self._load_config()

    def _read(self, path: str):
        content, _ = EncodingUtils.read_file_with_encoding(path)
        self.config.read_string(content, source=path)

    def _load_config(self):
        """加载配置文件，优先级：命令行参数 > 用户配置 > 默认配置"""
        if os.path.exists(self.default_config_path):
            self._read(self.default_config_path)
        if self.user_config_path:
            if not os.path.exists(self.user_config_path):
                raise FileNotFoundError(f"配置文件不存在: {self.user_config_path}")
            self._read(self.user_config_path)

    def save_config(self, file_path: str):
        """保存当前配置（含覆盖值）"""
        with open(file_path, "w", encoding="utf-8") as f:
            self.config.write(f)

    def get(self, section: str, key: str, fallback: str = "") -> str:
        """获取配置值"""
        return self.config.get(section, key, fallback=fallback).strip()

    def set(self, section: str, key: str, value: str):
        """设置配置值"""
        if not self.config.has_section(section):
            self.config.add_section(section)
        self.config.set(section, key, value)

    def get_bool(self, section: str, key: str, fallback: bool = False) -> bool:
        return self.config.getboolean(section, key, fallback=fallback)

    def get_int(self, section: str, key: str, fallback: int = 0) -> int:
        value = self.get(section, key)
        return int(value) if value else fallback

    def get_float(self, section: str, key: str, fallback: float = 0.0) -> float:
        value = self.get(section, key)
        return float(value) if value else fallback

    def get_optional_int(self, section: str, key: str) -> Optional[int]:
        value = self.get(section, key)
        return int(value) if value else None

    def get_optional_float(self, section: str, key: str) -> Optional[float]:
        value = self.get(section, key)
        return float(value) if value else None

    def get_float_list(self, section: str, key: str) -> List[float]:
        value = self.get(section, key)
        return [float(item) for item in value.split(",") if item.strip()]

    def get_int_list(self, section: str, key: str) -> List[int]:
        value = self.get(section, key)
        return [int(item) for item in value.split(",") if item.strip()]

    def apply_overrides(self, workers: Optional[int] = None, seed: Optional[int] = None,
                        output_dir: Optional[str] = None):
        """命令行参数覆盖配置文件"""
        if workers is not None:
            self.set("Run", "workers", str(workers))
        if seed is not None:
            self.set("Run", "seed", str(seed))
        if output_dir is not None:
            self.set("Paths", "output_dir", output_dir)

    def stage_seed(self, *labels) -> int:
        """按 (全局种子, 阶段标签) 派生的种子"""
        return derive_seed(self.seed, *labels)

    # 路径
    @property
    def real_corpus(self) -> str:
        return self.get("Paths", "real_corpus")

    @property
    def fake_corpora(self) -> str:
        return self.get("Paths", "fake_corpora")

    @property
    def output_dir(self) -> str:
        return self.get("Paths", "output_dir", "output")

    def output_path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    # 语料整理
    @property
    def blink_threshold(self) -> Optional[int]:
        return self.get_optional_int("Curation", "blink_threshold")

    @property
    def blink_threshold_fraction(self) -> float:
        return self.get_float("Curation", "blink_threshold_fraction", 0.3)

    @property
    def crop_size(self) -> int:
        return self.get_int("Curation", "crop_size", 512)

    @property
    def iso_frame(self) -> bool:
        return self.get_bool("Curation", "iso_frame", True)

    @property
    def frame_width(self) -> int:
        return self.get_int("Curation", "frame_width", 640)

    @property
    def frame_height(self) -> int:
        return self.get_int("Curation", "frame_height", 480)

    @property
    def mirror_augment(self) -> bool:
        return self.get_bool("Curation", "mirror_augment", False)

    # 分割与质量门
    @property
    def pupil_radius_min(self) -> float:
        return self.get_float("Segmentation", "pupil_radius_min", 20.0)

    @property
    def pupil_radius_max(self) -> float:
        return self.get_float("Segmentation", "pupil_radius_max", 110.0)

    @property
    def pupil_contrast_floor(self) -> float:
        return self.get_float("Segmentation", "pupil_contrast_floor", 12.0)

    @property
    def iris_contrast_floor(self) -> float:
        return self.get_float("Segmentation", "iris_contrast_floor", 12.0)

    @property
    def specular_threshold(self) -> int:
        return self.get_int("Segmentation", "specular_threshold", 250)

    @property
    def usable_fraction_floor(self) -> float:
        return self.get_float("Segmentation", "usable_fraction_floor", 0.40)

    @property
    def texture_floor(self) -> Optional[float]:
        return self.get_optional_float("Segmentation", "texture_floor")

    @property
    def texture_floor_fraction(self) -> float:
        return self.get_float("Segmentation", "texture_floor_fraction", 0.35)

    @property
    def boundary_contrast_floor(self) -> float:
        return self.get_float("Segmentation", "boundary_contrast_floor", 10.0)

    @property
    def enforce_quality_gate(self) -> bool:
        return self.get_bool("Segmentation", "enforce_quality_gate", True)

    # 编码
    @property
    def radial_res(self) -> int:
        return self.get_int("Encoder", "radial_res", 64)

    @property
    def angular_res(self) -> int:
        return self.get_int("Encoder", "angular_res", 512)

    @property
    def filter_count(self) -> int:
        return self.get_int("Encoder", "filter_count", 8)

    @property
    def filter_size(self) -> int:
        return self.get_int("Encoder", "filter_size", 9)

    @property
    def filter_seed(self) -> int:
        value = self.get_optional_int("Encoder", "filter_seed")
        return value if value is not None else self.stage_seed("encoder")

    @property
    def filter_file(self) -> str:
        return self.get("Encoder", "filter_file")

    # 比对
    @property
    def max_shift(self) -> int:
        return self.get_int("Matcher", "max_shift", 8)

    @property
    def min_overlap(self) -> int:
        return self.get_int("Matcher", "min_overlap", 1024)

    @property
    def orientation(self) -> str:
        return self.get("Matcher", "orientation", "distance").lower()

    @property
    def score_normalization(self) -> bool:
        return self.get_bool("Matcher", "score_normalization", False)

    @property
    def normalization_bits(self) -> int:
        return self.get_int("Matcher", "normalization_bits", 200000)

    # 分析
    @property
    def far_levels(self) -> List[float]:
        return self.get_float_list("Analysis", "far_levels")

    @property
    def bins(self) -> int:
        return self.get_int("Analysis", "bins", 100)

    @property
    def quantiles(self) -> List[float]:
        return self.get_float_list("Analysis", "quantiles")

    @property
    def flag_far(self) -> float:
        return self.get_float("Analysis", "flag_far", 1e-3)

    @property
    def flag_rule(self) -> str:
        return self.get("Analysis", "flag_rule", "inclusive").lower()

    @property
    def verdict_rule(self) -> str:
        return self.get("Analysis", "verdict_rule", "binomial").lower()

    @property
    def evidence_pairs(self) -> int:
        return self.get_int("Analysis", "evidence_pairs", 5)

    # 合成
    @property
    def identities(self) -> int:
        return self.get_int("Synth", "identities", 47)

    @property
    def frames_per_identity(self) -> int:
        return self.get_int("Synth", "frames_per_identity", 20)

    @property
    def blink_rate(self) -> float:
        return self.get_float("Synth", "blink_rate", 0.05)

    @property
    def memorization_rate(self) -> float:
        return self.get_float("Synth", "memorization_rate", 0.05)

    @property
    def snapshots(self) -> int:
        return self.get_int("Synth", "snapshots", 14)

    @property
    def samples_per_snapshot(self) -> int:
        return self.get_int("Synth", "samples_per_snapshot", 200)

    @property
    def fidelity_levels(self) -> List[int]:
        return self.get_int_list("Synth", "fidelity_levels")

    # 运行
    @property
    def seed(self) -> int:
        return self.get_int("Run", "seed", 2024)

    @property
    def workers(self) -> int:
        return self.get_int("Run", "workers", 1)
