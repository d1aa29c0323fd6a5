"""
审计流程处理器
synth → curate → extract → match → report 各阶段的业务逻辑，每个阶段只读取上一阶段的产物和配置
"""

import csv
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from .analysis import (
    summarize, roc, equal_error_rate, decidability, far_thresholds, strictest_attainable,
    leakage_heatmap, flag_leaks, diff_image, estimate_dof, distribution_shift,
    snapshot_iteration, leak_attribution, leak_recall, verdict,
)
from .corpus import curate_entries, mirror_augment, mirror_entry, iso_frame, load_entry, save_entry
from .encoding import FilterBank, build_filter_bank, extract_template
from .file_operations import FileOperations, JSONFileOperations
from .matching import ShiftRange, all_pairs
from .plotting import plot_distributions, plot_roc, plot_heatmap, save_evidence
from .segmentation import (
    SegmentationParams, QualityThresholds, locate_pupil, segment, measure_quality, calibrate_texture_floor,
)
from .synth import (
    GeneratorModel, render_real_frame, training_crops, sample_generator, leak_ledger,
    snapshot_fidelity,
)
from ..models.config import RunConfig
from ..models.corpus_data import CorpusEntry, CorpusManifest, ManifestRecord
from ..models.report import LeakageReport, SnapshotReport
from ..models.scores import Orientation, PairType, ScoreTable
from ..models.template import IrisTemplate, TemplateMeta
from ..utils.errors import IrisAuditError, InsufficientData, DegenerateDistribution, StageInputMissing
from ..utils.image_io import read_image
from ..utils.parallel import parallel_map
from ..utils.validators import ConfigValidator, ValidationSummary

logger = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_LEAK = 2

SNAPSHOT_PREFIX = "snapshot_"
REAL_CURATED = "real_curated.jsonl"
REAL_MIRRORED = "real_mirrored.jsonl"
LEAK_LEDGER = "leak_ledger.json"
TEMPLATE_SUFFIX = ".irt"


@dataclass
class StageResult:
    """阶段处理结果"""
    success: bool
    message: str
    counts: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = EXIT_CLEAN


def snapshot_name(snapshot: int) -> str:
    return f"{SNAPSHOT_PREFIX}{snapshot:02d}"


def snapshot_number(name: str) -> int:
    """snapshot_03 / snapshot_03.jsonl -> 3"""
    stem = os.path.splitext(os.path.basename(name))[0]
    return int(stem[len(SNAPSHOT_PREFIX):])


def segmentation_params(config: RunConfig) -> SegmentationParams:
    return SegmentationParams(
        pupil_radius_min=config.pupil_radius_min,
        pupil_radius_max=config.pupil_radius_max,
        pupil_contrast_floor=config.pupil_contrast_floor,
        iris_contrast_floor=config.iris_contrast_floor,
        specular_threshold=config.specular_threshold,
    )


def pupil_locator(params: SegmentationParams):
    """掩码没有瞳孔空洞时的回退：积分微分算子定位瞳孔中心"""
    def locate(image) -> Optional[Tuple[float, float]]:
        try:
            pupil = locate_pupil(image, params)
        except IrisAuditError as e:
            logger.debug(f"回退定位瞳孔失败: {e}")
            return None
        return pupil.cx, pupil.cy
    return locate


def template_meta(record: ManifestRecord) -> TemplateMeta:
    """清单记录对应的模板元数据；镜像副本视为独立的虹膜"""
    identity = record.identity
    if record.mirrored and identity:
        identity = f"{identity}_m"
    return TemplateMeta.from_origin(record.entry_id, identity, record.frame, record.origin_info)


# ---------------------------------------------------------------------------
# worker 函数（模块级，供进程池调用）
# ---------------------------------------------------------------------------

_STATE: Dict[str, Any] = {}


def _init_state(state: dict):
    _STATE.clear()
    _STATE.update(state)


def _render_real(task: Tuple[int, int]) -> CorpusEntry:
    identity_index, frame = task
    return render_real_frame(_STATE["seed"], identity_index, frame, _STATE["frames"], _STATE["blink_rate"])


def _sample_fake(index: int):
    return sample_generator(_STATE["model"], index)


def _measure_texture(image_path: str) -> Optional[float]:
    image = read_image(image_path)
    try:
        seg = segment(image, _STATE["params"])
    except IrisAuditError:
        return None
    return measure_quality(image, seg).texture_energy


def _extract_one(task: Tuple[str, Dict[str, Any], str]) -> Dict[str, Any]:
    image_path, meta_dict, out_path = task
    meta = TemplateMeta.from_dict(meta_dict)
    result = extract_template(
        read_image(image_path), _STATE["bank"], meta,
        params=_STATE["params"], thresholds=_STATE["thresholds"],
        radial_res=_STATE["radial_res"], angular_res=_STATE["angular_res"],
        enforce_quality_gate=_STATE["enforce"],
    )
    if result.template is not None:
        result.template.save(out_path)
    return {
        "template_id": meta.template_id,
        "passed": result.quality.passed,
        "written": result.template is not None,
        "reasons": [reason.value for reason in result.quality.reasons],
    }


class AuditPipeline:
    """审计流程处理器"""

    def __init__(self, config: RunConfig):
        self.config = config

    # ------------------------------------------------------------------
    # 公共
    # ------------------------------------------------------------------

    def _validate(self, stage: str) -> Optional[StageResult]:
        is_valid, message = ValidationSummary.summarize_results(ConfigValidator.validate(self.config, stage))
        if not is_valid:
            return StageResult(False, f"参数验证失败:\n{message}", exit_code=EXIT_ERROR)
        if message != "所有验证通过":
            logger.warning(message)
        return None

    def _run(self, stage: str, body) -> StageResult:
        """统一的验证与异常处理"""
        problem = self._validate(stage)
        if problem:
            logger.error(problem.message)
            return problem
        try:
            result = body()
        except StageInputMissing as e:
            logger.error(str(e))
            return StageResult(False, str(e), exit_code=EXIT_ERROR)
        except (IrisAuditError, RuntimeError, OSError, ValueError) as e:
            logger.exception(f"{stage} 阶段失败")
            return StageResult(False, f"{stage} 阶段失败: {e}", exit_code=EXIT_ERROR)
        logger.info(result.message)
        return result

    @property
    def manifests_dir(self) -> str:
        return self.config.output_path("manifests")

    @property
    def templates_dir(self) -> str:
        return self.config.output_path("templates")

    @property
    def scores_dir(self) -> str:
        return self.config.output_path("scores")

    def _fake_manifests(self) -> List[Tuple[int, str]]:
        """合成语料目录下各快照的清单路径"""
        result = []
        for directory in FileOperations.list_directories(self.config.fake_corpora, SNAPSHOT_PREFIX):
            path = os.path.join(directory, "manifest.jsonl")
            if os.path.isfile(path):
                result.append((snapshot_number(directory), path))
        return result

    def _curated_snapshots(self) -> List[Tuple[int, str]]:
        files = FileOperations.list_files(self.manifests_dir, ".jsonl")
        return [(snapshot_number(path), path) for path in files
                if os.path.basename(path).startswith(SNAPSHOT_PREFIX)]

    def _require(self, stage: str, path: str) -> str:
        if not os.path.exists(path):
            raise StageInputMissing(stage, path)
        return path

    # ------------------------------------------------------------------
    # synth
    # ------------------------------------------------------------------

    def synth(self) -> StageResult:
        return self._run("synth", self._synth)

    def _synth(self) -> StageResult:
        config = self.config
        real_dir = os.path.dirname(os.path.abspath(config.real_corpus))
        FileOperations.ensure_dir_exists(real_dir)
        FileOperations.reset_directory(os.path.join(real_dir, "images"))

        tasks = [(i, f) for i in range(config.identities) for f in range(config.frames_per_identity)]
        state = {"seed": config.stage_seed("real"), "frames": config.frames_per_identity,
                 "blink_rate": config.blink_rate}
        entries = parallel_map(_render_real, tasks, config.workers, initializer=_init_state, initargs=(state,))

        manifest = CorpusManifest(real_dir)
        for entry in entries:
            manifest.add_record(save_entry(entry, real_dir, f"images/{entry.identity}"))
        manifest.save_to_file(config.real_corpus)
        logger.info(f"真实语料: {len(manifest)} 帧，{config.identities} 个身份")

        crops = training_crops(entries, config.crop_size, config.blink_threshold_fraction)
        if config.mirror_augment:
            crops = mirror_augment(crops)
        del entries

        FileOperations.ensure_dir_exists(config.fake_corpora)
        for directory in FileOperations.list_directories(config.fake_corpora, SNAPSHOT_PREFIX):
            FileOperations.reset_directory(directory)

        ledger, fidelity_levels = [], config.fidelity_levels
        for snapshot in range(1, config.snapshots + 1):
            fidelity = (fidelity_levels[snapshot - 1] if fidelity_levels
                        else snapshot_fidelity(snapshot, config.snapshots))
            model = GeneratorModel(
                training_corpus=crops,
                memorization_rate=config.memorization_rate,
                fidelity_level=fidelity,
                seed=config.stage_seed("synth", snapshot),
                snapshot_id=snapshot,
                prototype_seed=config.stage_seed("synth", "prototype"),
            )
            samples = parallel_map(_sample_fake, range(config.samples_per_snapshot), config.workers,
                                   initializer=_init_state, initargs=({"model": model},))
            snap_dir = FileOperations.ensure_dir_exists(os.path.join(config.fake_corpora, snapshot_name(snapshot)))
            snap_manifest = CorpusManifest(snap_dir)
            for sample in samples:
                # 合成样本不附带分割掩码
                snap_manifest.add_record(save_entry(replace(sample, mask=None), snap_dir, "images"))
            snap_manifest.save_to_file(os.path.join(snap_dir, "manifest.jsonl"))
            planted = leak_ledger(model, config.samples_per_snapshot)
            ledger.extend(planted)
            logger.info(f"快照 {snapshot:02d}: 保真度 {fidelity}，{len(samples)} 个样本，植入泄露 {len(planted)}")

        JSONFileOperations.write_json(os.path.join(config.fake_corpora, LEAK_LEDGER), ledger)
        counts = {"real": len(manifest), "snapshots": config.snapshots, "planted_leaks": len(ledger)}
        return StageResult(True, f"合成完成: 真实 {counts['real']} 帧，{counts['snapshots']} 个快照", counts)

    # ------------------------------------------------------------------
    # curate
    # ------------------------------------------------------------------

    def curate(self) -> StageResult:
        return self._run("curate", self._curate)

    def _frame(self, entry):
        config = self.config
        if not config.iso_frame:
            return entry
        image = iso_frame(entry.image, config.crop_size, config.frame_width, config.frame_height)
        return replace(entry, image=image, mask=None)

    def _curate(self) -> StageResult:
        config = self.config
        real_manifest = CorpusManifest.load_from_file(self._require("synth", config.real_corpus))
        out_dir = FileOperations.reset_directory(self.manifests_dir)

        entries = [load_entry(real_manifest, record) for record in real_manifest]
        outcome = curate_entries(entries, config.blink_threshold, config.blink_threshold_fraction,
                                 config.crop_size, locate=pupil_locator(segmentation_params(config)))
        del entries
        real_counts = dict(outcome.counts)
        real_counts["mirrored_added"] = 0

        curated = CorpusManifest(out_dir)
        for entry in outcome.kept:
            curated.add_record(save_entry(self._frame(entry), out_dir, "images/real"))
        curated.save_to_file(os.path.join(out_dir, REAL_CURATED))

        # 镜像副本只作为生成器训练输入，不进入模板提取和比对
        if config.mirror_augment:
            mirrored = CorpusManifest(out_dir)
            for entry in outcome.kept:
                framed = self._frame(mirror_entry(entry))
                mirrored.add_record(save_entry(framed, out_dir, "images/real_mirrored"))
            mirrored.save_to_file(os.path.join(out_dir, REAL_MIRRORED))
            real_counts["mirrored_added"] = len(mirrored)

        snapshot_counts = {}
        for snapshot, path in self._fake_manifests():
            fake_manifest = CorpusManifest.load_from_file(path)
            name = snapshot_name(snapshot)
            target = CorpusManifest(out_dir)
            rejected = 0
            for record in fake_manifest:
                entry = load_entry(fake_manifest, record)
                try:
                    framed = self._frame(entry)
                except IrisAuditError as e:
                    rejected += 1
                    logger.warning(f"合成样本无法转换画幅 {record.entry_id}: {e}")
                    continue
                target.add_record(save_entry(framed, out_dir, f"images/{name}"))
            target.save_to_file(os.path.join(out_dir, f"{name}.jsonl"))
            snapshot_counts[f"{snapshot:02d}"] = {"input": len(fake_manifest), "kept": len(target),
                                                  "rejected": rejected}

        summary = {"blink_threshold": outcome.threshold, "real": real_counts, "snapshots": snapshot_counts}
        JSONFileOperations.write_json(os.path.join(out_dir, "curation_summary.json"), summary)
        return StageResult(True, f"整理完成: 真实保留 {len(curated)} 条，快照 {len(snapshot_counts)} 个", summary)

    # ------------------------------------------------------------------
    # extract
    # ------------------------------------------------------------------

    def extract(self) -> StageResult:
        return self._run("extract", self._extract)

    def _filter_bank(self) -> FilterBank:
        config = self.config
        if config.filter_file:
            logger.info(f"加载滤波器组: {config.filter_file}")
            return FilterBank.load(config.filter_file)
        return build_filter_bank(config.filter_seed, config.filter_count, config.filter_size)

    def _extract(self) -> StageResult:
        config = self.config
        real_path = self._require("curate", os.path.join(self.manifests_dir, REAL_CURATED))
        real_manifest = CorpusManifest.load_from_file(real_path)
        params = segmentation_params(config)

        texture_floor, floor_source = config.texture_floor, "config"
        if texture_floor is None:
            paths = [real_manifest.resolve(record.path) for record in real_manifest]
            energies = parallel_map(_measure_texture, paths, config.workers,
                                    initializer=_init_state, initargs=({"params": params},))
            texture_floor = calibrate_texture_floor([e for e in energies if e is not None],
                                                    config.texture_floor_fraction)
            floor_source = "calibrated"
        logger.info(f"纹理能量下限: {texture_floor:.4f} ({floor_source})")

        bank = self._filter_bank()
        state = {
            "bank": bank,
            "params": params,
            "thresholds": QualityThresholds(
                usable_fraction=config.usable_fraction_floor,
                texture_energy=texture_floor,
                boundary_contrast=config.boundary_contrast_floor,
            ),
            "radial_res": config.radial_res,
            "angular_res": config.angular_res,
            "enforce": config.enforce_quality_gate,
        }
        out_dir = FileOperations.reset_directory(self.templates_dir)

        groups = [("real", real_manifest)]
        for snapshot, path in self._curated_snapshots():
            groups.append((snapshot_name(snapshot), CorpusManifest.load_from_file(path)))

        summary: Dict[str, Any] = {
            "texture_floor": texture_floor,
            "texture_floor_source": floor_source,
            "filter_seed": bank.seed,
            "quality_gate": config.enforce_quality_gate,
            "groups": {},
        }
        for name, manifest in groups:
            group_dir = FileOperations.ensure_dir_exists(os.path.join(out_dir, name))
            tasks = [(manifest.resolve(record.path), template_meta(record).to_dict(),
                      os.path.join(group_dir, record.entry_id + TEMPLATE_SUFFIX)) for record in manifest]
            results = parallel_map(_extract_one, tasks, config.workers, initializer=_init_state, initargs=(state,))
            summary["groups"][name] = self._tally(name, results)

        JSONFileOperations.write_json(os.path.join(out_dir, "extract_summary.json"), summary)
        written = sum(group["written"] for group in summary["groups"].values())
        return StageResult(True, f"模板提取完成: 写出 {written} 个模板", summary)

    @staticmethod
    def _tally(name: str, results: List[Dict[str, Any]]) -> Dict[str, Any]:
        reasons: Dict[str, int] = {}
        for item in results:
            if not item["passed"]:
                logger.debug(f"质量门未通过 {item['template_id']}: {', '.join(item['reasons'])}")
            for reason in item["reasons"]:
                reasons[reason] = reasons.get(reason, 0) + 1
        passed = sum(1 for item in results if item["passed"])
        tally = {
            "input": len(results),
            "passed": passed,
            "failed": len(results) - passed,
            "written": sum(1 for item in results if item["written"]),
            "reasons": dict(sorted(reasons.items())),
        }
        logger.info(f"{name}: 输入 {tally['input']}，通过 {tally['passed']}，未通过 {tally['failed']}")
        return tally

    # ------------------------------------------------------------------
    # match
    # ------------------------------------------------------------------

    def match(self) -> StageResult:
        return self._run("match", self._match)

    def _load_templates(self, name: str) -> List[IrisTemplate]:
        files = FileOperations.list_files(os.path.join(self.templates_dir, name), TEMPLATE_SUFFIX)
        return [IrisTemplate.load(path) for path in files]

    def _match(self) -> StageResult:
        config = self.config
        self._require("extract", os.path.join(self.templates_dir, "extract_summary.json"))
        options = {
            "shifts": ShiftRange(config.max_shift),
            "min_overlap": config.min_overlap,
            "orientation": Orientation.parse(config.orientation),
            "workers": config.workers,
            "normalization_bits": config.normalization_bits if config.score_normalization else None,
        }
        out_dir = FileOperations.reset_directory(self.scores_dir)

        reals = self._load_templates("real")
        real_table = all_pairs(reals, **options)
        genuine = real_table.of_type(PairType.GENUINE)
        impostor_rr = real_table.of_type(PairType.IMPOSTOR_RR)
        genuine.save_to_file(os.path.join(out_dir, "genuine.csv"))
        impostor_rr.save_to_file(os.path.join(out_dir, "impostor_rr.csv"))
        counts: Dict[str, Any] = {"real_templates": len(reals), "genuine": len(genuine),
                                  "impostor_rr": len(impostor_rr), "snapshots": {}}

        for directory in FileOperations.list_directories(self.templates_dir, SNAPSHOT_PREFIX):
            name = os.path.basename(directory)
            fakes = self._load_templates(name)
            snap_dir = FileOperations.ensure_dir_exists(os.path.join(out_dir, name))
            rf = all_pairs(reals, fakes, **options)
            ff = all_pairs(fakes, **options)
            rf.save_to_file(os.path.join(snap_dir, "impostor_rf.csv"))
            ff.save_to_file(os.path.join(snap_dir, "impostor_ff.csv"))
            counts["snapshots"][name] = {"fake_templates": len(fakes), "impostor_rf": len(rf),
                                         "impostor_ff": len(ff)}
            logger.info(f"{name}: R-F {len(rf)} 对，F-F {len(ff)} 对")

        return StageResult(True, f"比对完成: 真匹配 {len(genuine)} 对，R-R 冒名 {len(impostor_rr)} 对", counts)

    # ------------------------------------------------------------------
    # report
    # ------------------------------------------------------------------

    def report(self) -> StageResult:
        return self._run("report", self._report)

    def _summarize(self, table: ScoreTable, pair_type: PairType, orientation: Orientation, notes: List[str]):
        try:
            return summarize(table.values(), pair_type, orientation, self.config.bins, self.config.quantiles)
        except InsufficientData as e:
            notes.append(str(e))
            return None

    def _load_ledger(self) -> Optional[List[Dict[str, Any]]]:
        path = os.path.join(self.config.fake_corpora, LEAK_LEDGER)
        if not os.path.isfile(path):
            return None
        return JSONFileOperations.read_json(path)

    def _report(self) -> StageResult:
        config = self.config
        orientation = Orientation.parse(config.orientation)
        genuine_table = ScoreTable.load_from_file(self._require("match", os.path.join(self.scores_dir, "genuine.csv")))
        rr_table = ScoreTable.load_from_file(self._require("match", os.path.join(self.scores_dir, "impostor_rr.csv")))
        reports_dir = FileOperations.reset_directory(config.output_path("reports"))
        plots_dir = FileOperations.reset_directory(config.output_path("plots"))

        genuine = summarize(genuine_table.values(), PairType.GENUINE, orientation, config.bins, config.quantiles)
        rr = summarize(rr_table.values(), PairType.IMPOSTOR_RR, orientation, config.bins, config.quantiles)
        thresholds = far_thresholds(rr, config.far_levels)
        report = LeakageReport(orientation=orientation, thresholds=thresholds,
                               baseline={PairType.GENUINE.slug: genuine, PairType.IMPOSTOR_RR.slug: rr})
        report.baseline_roc = roc(genuine, rr)
        eer, eer_threshold = equal_error_rate(genuine, rr)
        report.equal_error_rate = {"eer": eer, "threshold": eer_threshold}
        try:
            report.decidability = decidability(genuine, rr)
            report.dof = estimate_dof(rr)
        except DegenerateDistribution as e:
            logger.warning(str(e))

        flag_threshold = far_thresholds(rr, [config.flag_far])[0]
        if not flag_threshold.attainable:
            flag_threshold = strictest_attainable(thresholds)
            logger.warning(f"FAR {config.flag_far:g} 不可达，改用最严格的可达级别标记")
        if flag_threshold is not None:
            report.flag_far = flag_threshold.level

        curated = CorpusManifest.load_from_file(self._require("curate", os.path.join(self.manifests_dir, REAL_CURATED)))
        real_records = {record.entry_id: (curated, record) for record in curated}
        real_identities = {entry_id: record.identity for entry_id, (_, record) in real_records.items()}
        frames_per_identity: Dict[str, int] = {}
        for record in curated:
            if not record.mirrored:
                frames_per_identity[record.identity] = frames_per_identity.get(record.identity, 0) + 1
        ledger = self._load_ledger()

        rf_scores: Dict[int, List[float]] = {}
        all_flagged = []
        for directory in FileOperations.list_directories(self.scores_dir, SNAPSHOT_PREFIX):
            name = os.path.basename(directory)
            snapshot = snapshot_number(name)
            rf_table = ScoreTable.load_from_file(os.path.join(directory, "impostor_rf.csv"))
            ff_table = ScoreTable.load_from_file(os.path.join(directory, "impostor_ff.csv"))
            rf_scores[snapshot] = rf_table.values()

            item = SnapshotReport(snapshot=snapshot, iteration=snapshot_iteration(snapshot),
                                  rf_count=len(rf_scores[snapshot]))
            rf = self._summarize(rf_table, PairType.IMPOSTOR_RF, orientation, item.notes)
            ff = self._summarize(ff_table, PairType.IMPOSTOR_FF, orientation, item.notes)
            for dist in (rf, ff):
                if dist is not None:
                    item.distributions[dist.pair_type.slug] = dist
            if rf is not None:
                item.roc = roc(genuine, rf)
                try:
                    item.dof = estimate_dof(rf)
                except DegenerateDistribution as e:
                    item.notes.append(str(e))
                try:
                    item.shift = distribution_shift(rr, rf)
                except InsufficientData as e:
                    item.notes.append(str(e))
            if flag_threshold is not None:
                item.flagged_pairs = flag_leaks(rf_table.valid_records(), flag_threshold.threshold, orientation,
                                                inclusive=config.flag_rule == "inclusive")
                all_flagged.extend(item.flagged_pairs)
            if ledger is not None:
                planted = [leak["fake_id"] for leak in ledger if leak["snapshot"] == snapshot]
                item.leak_recall = leak_recall(item.flagged_pairs, planted)
                if item.leak_recall is not None:
                    logger.info(f"{name}: 植入泄露召回率 {item.leak_recall:.3f}")
            self._emit_evidence(item, name, real_records, reports_dir)
            plot_distributions({**report.baseline, **item.distributions},
                               os.path.join(plots_dir, f"{name}_distributions.svg"), f"snapshot {snapshot:02d}")
            report.snapshots.append(item)

        report.heatmap = leakage_heatmap(rf_scores, thresholds, orientation)
        for item in report.snapshots:
            item.heatmap_row = report.heatmap.column(item.snapshot)
        report.attribution = leak_attribution(all_flagged, real_identities, frames_per_identity)
        extract_summary = os.path.join(self.templates_dir, "extract_summary.json")
        if os.path.isfile(extract_summary):
            report.extraction = JSONFileOperations.read_json(extract_summary)
        report.verdict = verdict(report, rf_scores, config.verdict_rule)

        report.save_to_file(os.path.join(reports_dir, "leakage_report.json"))
        self._write_heatmap_csv(report, os.path.join(reports_dir, "heatmap.csv"))
        plot_distributions(report.baseline, os.path.join(plots_dir, "baseline_distributions.svg"), "baseline")
        curves = {"baseline": report.baseline_roc}
        curves.update({snapshot_name(item.snapshot): item.roc for item in report.snapshots if item.roc})
        plot_roc(curves, os.path.join(plots_dir, "roc.svg"), "genuine vs impostor")
        plot_heatmap(report.heatmap, os.path.join(plots_dir, "heatmap.svg"), "R-F false matches (%)")

        flags = sum(report.verdict.flags.values())
        if report.verdict.leak:
            message = f"检测到身份泄露: FAR {report.verdict.far:g} 下共 {flags} 个 R-F 配对超过阈值"
            return StageResult(True, message, report.verdict.to_dict(), exit_code=EXIT_LEAK)
        return StageResult(True, "未检测到身份泄露", report.verdict.to_dict())

    def _emit_evidence(self, item: SnapshotReport, name: str,
                       real_records: Dict[str, Tuple[CorpusManifest, ManifestRecord]], reports_dir: str):
        """为超出幅度最大的若干配对写出 真实|合成|差异 三联图"""
        if not item.flagged_pairs or self.config.evidence_pairs <= 0:
            return
        fake_path = os.path.join(self.manifests_dir, f"{name}.jsonl")
        if not os.path.isfile(fake_path):
            return
        fake_manifest = CorpusManifest.load_from_file(fake_path)
        fake_records = {record.entry_id: record for record in fake_manifest}
        evidence_dir = FileOperations.ensure_dir_exists(os.path.join(reports_dir, "evidence", name))
        for pair in item.flagged_pairs[:self.config.evidence_pairs]:
            if pair.id_a not in real_records or pair.id_b not in fake_records:
                continue
            real_manifest, real_record = real_records[pair.id_a]
            real = read_image(real_manifest.resolve(real_record.path))
            fake = read_image(fake_manifest.resolve(fake_records[pair.id_b].path))
            try:
                diff = diff_image(real, fake)
            except IrisAuditError:
                diff = None
            file_name = f"{pair.id_a}__{pair.id_b}.png"
            save_evidence(real, fake, diff.image if diff else None, os.path.join(evidence_dir, file_name))
            pair.evidence = {"path": f"evidence/{name}/{file_name}"}
            if diff is not None:
                pair.evidence.update(diff.to_dict())

    @staticmethod
    def _write_heatmap_csv(report: LeakageReport, path: str):
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                csv.writer(f, lineterminator="\n").writerows(report.heatmap.to_rows())
        except OSError as e:
            raise IrisAuditError(f"写入热力图失败 {path}: {e}")

    # ------------------------------------------------------------------
    # run-all
    # ------------------------------------------------------------------

    def run_all(self) -> StageResult:
        """依次执行全部阶段，任一阶段失败即停止；返回 report 阶段的结论"""
        problem = self._validate("run-all")
        if problem:
            logger.error(problem.message)
            return problem
        result = None
        for stage in (self.synth, self.curate, self.extract, self.match, self.report):
            result = stage()
            if not result.success:
                return result
        return result
