"""
配置验证工具类
在各阶段运行前检查路径和参数范围
"""

import os
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from ..models.config import RunConfig
from ..models.scores import Orientation


class ValidationLevel(Enum):
    """验证级别"""
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


@dataclass
class ValidationResult:
    """验证结果"""
    is_valid: bool
    level: ValidationLevel
    message: str
    field_name: Optional[str] = None


def _ok(message: str, field_name: Optional[str] = None) -> ValidationResult:
    return ValidationResult(True, ValidationLevel.INFO, message, field_name)


def _error(message: str, field_name: Optional[str] = None) -> ValidationResult:
    return ValidationResult(False, ValidationLevel.ERROR, message, field_name)


def _warning(message: str, field_name: Optional[str] = None) -> ValidationResult:
    return ValidationResult(True, ValidationLevel.WARNING, message, field_name)


class PathValidator:
    """路径验证器"""

    INVALID_CHARS = ("<", ">", "|", "*", "?")

    @staticmethod
    def _check_format(path: str, field_name: str) -> Optional[ValidationResult]:
        if not path or not path.strip():
            return _error(f"{field_name} 不能为空", field_name)
        if any(char in path for char in PathValidator.INVALID_CHARS):
            return _error(f"{field_name} 路径格式无效: {path}", field_name)
        return None

    @staticmethod
    def validate_input_file(path: str, field_name: str) -> ValidationResult:
        """输入文件必须存在且可读"""
        problem = PathValidator._check_format(path, field_name)
        if problem:
            return problem
        if not os.path.isfile(path):
            return _error(f"{field_name} 文件不存在: {path}", field_name)
        if not os.access(path, os.R_OK):
            return _error(f"{field_name} 没有读取权限: {path}", field_name)
        return _ok(f"{field_name} 有效", field_name)

    @staticmethod
    def validate_input_folder(path: str, field_name: str) -> ValidationResult:
        """输入目录必须存在"""
        problem = PathValidator._check_format(path, field_name)
        if problem:
            return problem
        if not os.path.isdir(path):
            return _error(f"{field_name} 目录不存在: {path}", field_name)
        return _ok(f"{field_name} 有效", field_name)

    @staticmethod
    def validate_output_folder(path: str, field_name: str) -> ValidationResult:
        """输出目录：已存在时必须可写，不存在时其最近的已存在上级必须可写"""
        problem = PathValidator._check_format(path, field_name)
        if problem:
            return problem
        existing = os.path.abspath(path)
        while not os.path.exists(existing):
            parent = os.path.dirname(existing)
            if parent == existing:
                break
            existing = parent
        if os.path.exists(existing) and not os.path.isdir(existing):
            return _error(f"{field_name} 不是目录: {existing}", field_name)
        if not os.access(existing, os.W_OK):
            return _error(f"{field_name} 没有写入权限: {existing}", field_name)
        return _ok(f"{field_name} 有效", field_name)


class ConfigValidator:
    """运行配置验证器"""

    STAGES = ("synth", "curate", "extract", "match", "report", "run-all")

    @staticmethod
    def validate_parameters(config: RunConfig) -> List[ValidationResult]:
        """参数范围检查（与各模块的约束一致）"""
        results = []

        def require(condition: bool, message: str, field_name: str):
            results.append(_ok(f"{field_name} 有效", field_name) if condition else _error(message, field_name))

        require(config.crop_size > 0, f"crop_size 必须为正: {config.crop_size}", "crop_size")
        require(0.0 <= config.blink_threshold_fraction <= 1.0,
                f"blink_threshold_fraction 必须在 [0, 1] 内: {config.blink_threshold_fraction}",
                "blink_threshold_fraction")
        require(0 < config.pupil_radius_min < config.pupil_radius_max,
                "要求 0 < pupil_radius_min < pupil_radius_max", "pupil_radius")
        require(0.0 <= config.usable_fraction_floor <= 1.0,
                f"usable_fraction_floor 必须在 [0, 1] 内: {config.usable_fraction_floor}", "usable_fraction_floor")
        require(0 < config.specular_threshold <= 255,
                f"specular_threshold 必须在 (0, 255] 内: {config.specular_threshold}", "specular_threshold")

        size = config.filter_size
        require(size > 0 and size % 2 == 1, f"filter_size 必须为正奇数: {size}", "filter_size")
        require(0 < config.filter_count <= size * size - 1,
                f"filter_count 必须在 1..{size * size - 1} 内: {config.filter_count}", "filter_count")
        require(config.radial_res > 2 * (size // 2),
                f"radial_res {config.radial_res} 必须大于 2·⌊filter_size/2⌋", "radial_res")
        require(config.angular_res > 0, f"angular_res 必须为正: {config.angular_res}", "angular_res")

        require(0 <= config.max_shift < config.angular_res / 2,
                f"max_shift 必须在 [0, Θ/2) 内: {config.max_shift}", "max_shift")
        require(config.min_overlap > 0, f"min_overlap 必须为正: {config.min_overlap}", "min_overlap")
        require(config.orientation in {o.value for o in Orientation},
                f"未知的分数方向: {config.orientation}", "orientation")
        require(config.normalization_bits > 0,
                f"normalization_bits 必须为正: {config.normalization_bits}", "normalization_bits")

        levels = config.far_levels
        require(bool(levels) and all(0.0 < level < 1.0 for level in levels),
                f"far_levels 必须为 (0, 1) 内的非空列表: {levels}", "far_levels")
        require(0.0 < config.flag_far < 1.0, f"flag_far 必须在 (0, 1) 内: {config.flag_far}", "flag_far")
        require(all(0.0 <= q <= 1.0 for q in config.quantiles), "quantiles 必须在 [0, 1] 内", "quantiles")
        require(config.bins > 0, f"bins 必须为正: {config.bins}", "bins")
        require(config.flag_rule in ("inclusive", "strict"), f"未知的标记规则: {config.flag_rule}", "flag_rule")
        require(config.verdict_rule in ("any", "binomial"), f"未知的判定规则: {config.verdict_rule}", "verdict_rule")

        require(config.identities > 0, f"identities 必须为正: {config.identities}", "identities")
        require(config.frames_per_identity > 0,
                f"frames_per_identity 必须为正: {config.frames_per_identity}", "frames_per_identity")
        require(0.0 <= config.memorization_rate <= 1.0,
                f"memorization_rate 必须在 [0, 1] 内: {config.memorization_rate}", "memorization_rate")
        require(0.0 <= config.blink_rate < 1.0, f"blink_rate 必须在 [0, 1) 内: {config.blink_rate}", "blink_rate")
        require(config.snapshots > 0, f"snapshots 必须为正: {config.snapshots}", "snapshots")
        fidelity = config.fidelity_levels
        if fidelity:
            require(len(fidelity) == config.snapshots and all(1 <= level <= 14 for level in fidelity),
                    "fidelity_levels 必须为每个快照给出 1..14 的级别", "fidelity_levels")
        require(config.workers >= 1, f"workers 至少为1: {config.workers}", "workers")

        if config.memorization_rate > 0 and config.samples_per_snapshot * config.memorization_rate < 1:
            results.append(_warning("memorization_rate 过低，单个快照的期望泄露数不足1", "memorization_rate"))
        return results

    @staticmethod
    def validate_paths(config: RunConfig, stage: str) -> List[ValidationResult]:
        """阶段相关的路径检查：读入的路径必须存在，输出目录必须可写"""
        if stage not in ConfigValidator.STAGES:
            return [_error(f"未知的阶段: {stage}", "stage")]
        results = [PathValidator.validate_output_folder(config.output_dir, "output_dir")]
        if stage == "synth" or stage == "run-all":
            real_dir = os.path.dirname(os.path.abspath(config.real_corpus))
            results.append(PathValidator.validate_output_folder(real_dir, "real_corpus"))
            results.append(PathValidator.validate_output_folder(config.fake_corpora, "fake_corpora"))
        elif stage == "curate":
            results.append(PathValidator.validate_input_file(config.real_corpus, "real_corpus"))
            if os.path.isdir(config.fake_corpora):
                results.append(_ok("fake_corpora 有效", "fake_corpora"))
            else:
                results.append(_warning(f"合成语料目录不存在，仅整理真实语料: {config.fake_corpora}",
                                        "fake_corpora"))
        if config.filter_file:
            results.append(PathValidator.validate_input_file(config.filter_file, "filter_file"))
        return results

    @staticmethod
    def validate(config: RunConfig, stage: str) -> List[ValidationResult]:
        return ConfigValidator.validate_parameters(config) + ConfigValidator.validate_paths(config, stage)


class ValidationSummary:
    """验证结果汇总"""

    @staticmethod
    def summarize_results(results: List[ValidationResult]) -> Tuple[bool, str]:
        """汇总验证结果

        Returns:
            Tuple[bool, str]: (是否全部有效, 汇总消息)
        """
        errors = [r for r in results if not r.is_valid and r.level == ValidationLevel.ERROR]
        warnings = [r for r in results if r.level == ValidationLevel.WARNING]

        if errors:
            error_messages = [f"- {r.message}" for r in errors]
            return False, f"发现 {len(errors)} 个错误:\n" + "\n".join(error_messages)

        if warnings:
            warning_messages = [f"- {r.message}" for r in warnings]
            return True, f"发现 {len(warnings)} 个警告:\n" + "\n".join(warning_messages)

        return True, "所有验证通过"
