"""
验收基准（耗时较长，不在默认测试集中）

运行方式: python tests/test_runner.py --benchmarks
"""

import json
import logging
import os
import shutil
import tempfile
import time
import unittest

import numpy as np

from src.core.analysis import summarize, roc, estimate_dof
from src.core.encoding import build_filter_bank, extract_template, trimmed_rows
from src.core.matching import ShiftRange, all_pairs
from src.core.pipeline import EXIT_CLEAN
from src.core.segmentation import segment, measure_quality, calibrate_texture_floor, QualityThresholds
from src.core.synth import (
    IdentitySpec, CaptureSpec, render_iris, render_real_frame, training_crops,
    GeneratorModel, sample_generator,
)
from src.main import main
from src.models.corpus_data import Origin
from src.models.scores import Orientation, PairType
from src.models.template import IrisTemplate, TemplateMeta
from src.utils.errors import IrisAuditError

WORKERS = max(1, min(8, os.cpu_count() or 1))
DEFAULT_DIMS = (trimmed_rows(64, 9), 512, 8)

LEAK_CONFIG = """
[Paths]
real_corpus = {root}/corpus/real/manifest.jsonl
fake_corpora = {root}/corpus/fakes
output_dir = {root}/output

[Analysis]
far_levels = 1e-2, 1e-3
flag_far = 1e-3
verdict_rule = binomial

[Synth]
identities = 520
frames_per_identity = 2
blink_rate = 0
memorization_rate = {rate}
snapshots = 1
samples_per_snapshot = 200
fidelity_levels = 14

[Run]
seed = 11
workers = {workers}
"""


def _meta(template_id: str, identity: str, origin: Origin, frame: int = 0) -> TemplateMeta:
    return TemplateMeta.from_origin(template_id, identity, frame, origin)


def _random_templates(rng, count: int, prefix: str, origin_of) -> list:
    templates = []
    for i in range(count):
        meta = _meta(f"{prefix}{i:05d}", f"{prefix}{i:05d}" if prefix == "r" else "", origin_of(i), i)
        templates.append(IrisTemplate(rng.random(DEFAULT_DIMS) > 0.5, rng.random(DEFAULT_DIMS) < 0.9, meta))
    return templates


def _reset_logging():
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()


class BenchmarkMatcher(unittest.TestCase):
    """默认尺寸模板的全配对吞吐与冒名分布"""

    def test_throughput_and_impostor_mean(self):
        rng = np.random.default_rng(2024)
        fakes = _random_templates(rng, 200, "f", lambda i: Origin.synthetic(1, i))
        reals = _random_templates(rng, 4000, "r", lambda i: Origin.real())

        start = time.perf_counter()
        table = all_pairs(fakes, reals, ShiftRange(8), workers=WORKERS)
        elapsed = time.perf_counter() - start
        print(f"\n{len(table)} 对 / {elapsed:.1f} 秒 ({len(table) / elapsed:.0f} 对/秒, {WORKERS} 进程)")

        self.assertEqual(len(table), 200 * 4000)
        values = np.asarray(table.values())
        self.assertEqual(values.size, len(table))
        self.assertAlmostEqual(float(values.mean()), 0.5, delta=0.02)

    def test_worker_count_does_not_change_scores(self):
        rng = np.random.default_rng(7)
        fakes = _random_templates(rng, 20, "f", lambda i: Origin.synthetic(1, i))
        reals = _random_templates(rng, 60, "r", lambda i: Origin.real())
        single = all_pairs(fakes, reals, ShiftRange(8), workers=1)
        multi = all_pairs(fakes, reals, ShiftRange(8), workers=WORKERS)
        self.assertEqual([r.to_row() for r in single], [r.to_row() for r in multi])


class BenchmarkRenderedBaseline(unittest.TestCase):
    """渲染身份的真匹配与冒名基线"""

    def test_genuine_and_impostor_separate(self):
        bank = build_filter_bank(seed=0)
        templates = []
        for identity in range(50):
            for capture in range(2):
                rendered = render_iris(
                    IdentitySpec(texture_seed=1000 + identity),
                    CaptureSpec(noise_sigma=2.0, noise_seed=identity * 10 + capture),
                )
                name = f"S{identity:02d}"
                meta = _meta(f"{name}_f{capture:05d}", name, Origin.real(), capture)
                result = extract_template(rendered.image, bank, meta, enforce_quality_gate=False)
                if result.template is not None:
                    templates.append(result.template)
        self.assertGreaterEqual(len(templates), 90)

        table = all_pairs(templates, shifts=ShiftRange(8), workers=WORKERS)
        genuine = summarize(table.of_type(PairType.GENUINE).values(), PairType.GENUINE, Orientation.DISTANCE)
        impostor = summarize(table.of_type(PairType.IMPOSTOR_RR).values(), PairType.IMPOSTOR_RR,
                             Orientation.DISTANCE)
        curve = roc(genuine, impostor)
        dof = estimate_dof(impostor)
        print(f"\n真匹配均值 {genuine.mean:.4f}，冒名均值 {impostor.mean:.4f}，"
              f"AUC {curve.auc:.4f}，自由度 {dof.n_dof:.0f}")
        self.assertLess(genuine.mean, impostor.mean)
        self.assertAlmostEqual(impostor.mean, 0.5, delta=0.02)
        self.assertGreaterEqual(curve.auc, 0.99)

        # 前后两半身份各自估计的自由度应一致
        halves = []
        for names in ({f"S{i:02d}" for i in range(25)}, {f"S{i:02d}" for i in range(25, 50)}):
            values = [r.score.value for r in table.of_type(PairType.IMPOSTOR_RR).valid_records()
                      if r.id_a[:3] in names and r.id_b[:3] in names]
            halves.append(estimate_dof(summarize(values, PairType.IMPOSTOR_RR, Orientation.DISTANCE)).n_dof)
        print(f"分半自由度: {halves[0]:.0f} / {halves[1]:.0f}")
        self.assertGreaterEqual(dof.n_dof, 30)
        self.assertLessEqual(max(halves) / min(halves), 2.0)


class BenchmarkQualityGate(unittest.TestCase):
    """不同保真度快照的质量门通过率"""

    def test_fidelity_extremes(self):
        frames = [render_real_frame(11, identity, 0, 1) for identity in range(6)]
        crops = training_crops(frames)
        energies = []
        for crop in crops:
            try:
                energies.append(measure_quality(crop.image, segment(crop.image)).texture_energy)
            except IrisAuditError:
                continue
        thresholds = QualityThresholds(texture_energy=calibrate_texture_floor(energies))
        bank = build_filter_bank(seed=0)

        samples = 200
        rates = {}
        for level in (1, 14):
            model = GeneratorModel(crops, 0.0, level, seed=5)
            passed = 0
            for index in range(samples):
                fake = sample_generator(model, index)
                result = extract_template(fake.image, bank, thresholds=thresholds)
                passed += int(result.quality.passed)
            rates[level] = passed / samples
        print(f"\n质量门通过率: 级别1 {rates[1]:.2%}，级别14 {rates[14]:.2%}")
        self.assertLessEqual(rates[1], 0.05)
        self.assertGreaterEqual(rates[14], 0.95)


class BenchmarkLeakDetection(unittest.TestCase):
    """千帧真实语料上的植入泄露召回与无泄露基线"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        _reset_logging()
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def _run(self, rate: float):
        root = os.path.join(self.temp_dir, f"rate_{rate}")
        os.makedirs(root)
        config_path = os.path.join(root, "leak.ini")
        with open(config_path, "w", encoding="utf-8") as f:
            f.write(LEAK_CONFIG.format(root=root.replace(os.sep, "/"), rate=rate, workers=WORKERS))
        exit_code = main(["run-all", "--config", config_path])
        _reset_logging()
        with open(os.path.join(root, "output", "reports", "leakage_report.json"), encoding="utf-8") as f:
            return exit_code, json.load(f)

    def test_planted_leaks_are_recalled(self):
        _, report = self._run(0.05)
        self.assertEqual(report["far_thresholds"][1]["status"], "ok")
        self.assertGreaterEqual(report["extraction"]["groups"]["real"]["written"], 1000)
        snapshot = report["snapshots"][0]
        print(f"\n召回率 {snapshot['leak_recall']:.2%}，标记 {len(snapshot['flagged_pairs'])} 对")
        self.assertGreaterEqual(snapshot["leak_recall"], 0.9)

    def test_no_memorization_stays_within_allowance(self):
        exit_code, report = self._run(0.0)
        print(f"\n标记数 {report['verdict']['flags']}，允许数 {report['verdict']['allowances']}")
        self.assertEqual(report["verdict"]["far"], "1e-03")
        self.assertFalse(report["verdict"]["leak"])
        self.assertEqual(exit_code, EXIT_CLEAN)


if __name__ == '__main__':
    unittest.main()
