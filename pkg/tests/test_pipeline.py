"""
测试完整审计流程
"""

import unittest
import tempfile
import os
import shutil
import json
import logging
import csv
from dataclasses import replace

from scipy import ndimage

from src.core.corpus import pupil_center_from_mask, save_entry
from src.core.pipeline import (
    AuditPipeline, EXIT_CLEAN, EXIT_LEAK, EXIT_ERROR, REAL_MIRRORED, snapshot_name, snapshot_number,
)
from src.core.synth import planted_blink, render_real_frame
from src.main import main
from src.models.config import RunConfig
from src.models.corpus_data import CorpusManifest
from src.models.imaging import SegMask

TINY_CONFIG = """
[Paths]
real_corpus = {root}/corpus/real/manifest.jsonl
fake_corpora = {root}/corpus/fakes
output_dir = {root}/output

[Segmentation]
enforce_quality_gate = false

[Encoder]
radial_res = 24
angular_res = 64
filter_count = 4
filter_size = 5

[Matcher]
max_shift = 4
min_overlap = 100

[Analysis]
far_levels = 1e-1, 1e-2
flag_far = 1e-1
verdict_rule = any
evidence_pairs = 2

[Synth]
identities = 3
frames_per_identity = 2
blink_rate = 0
memorization_rate = 1.0
snapshots = 2
samples_per_snapshot = 3
fidelity_levels = 14, 14

[Run]
seed = 7
workers = 1
"""


VARIANT_CONFIG = TINY_CONFIG.replace("frames_per_identity = 2", "frames_per_identity = 4").replace(
    "blink_rate = 0\n", "blink_rate = 0.3\n") + """
[Curation]
mirror_augment = true
"""


def _reset_logging():
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()


class TestPipeline(unittest.TestCase):
    """小规模端到端运行"""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.mkdtemp()
        cls.config_path = os.path.join(cls.temp_dir, "tiny.ini")
        with open(cls.config_path, "w", encoding="utf-8") as f:
            f.write(TINY_CONFIG.format(root=cls.temp_dir.replace(os.sep, "/")))
        cls.exit_code = main(["run-all", "--config", cls.config_path])
        cls.output = os.path.join(cls.temp_dir, "output")

    @classmethod
    def tearDownClass(cls):
        _reset_logging()
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def _read_json(self, *parts):
        with open(os.path.join(self.output, *parts), encoding="utf-8") as f:
            return json.load(f)

    def test_exit_code_reports_leak(self):
        self.assertEqual(self.exit_code, EXIT_LEAK)
        self.assertTrue(os.path.isfile(os.path.join(self.output, "logs", "audit.log")))

    def test_stage_outputs(self):
        expected = [
            ("manifests", "real_curated.jsonl"),
            ("manifests", "snapshot_01.jsonl"),
            ("manifests", "curation_summary.json"),
            ("templates", "extract_summary.json"),
            ("scores", "genuine.csv"),
            ("scores", "impostor_rr.csv"),
            ("scores", "snapshot_02", "impostor_rf.csv"),
            ("scores", "snapshot_02", "impostor_ff.csv"),
            ("reports", "leakage_report.json"),
            ("reports", "heatmap.csv"),
            ("plots", "roc.svg"),
            ("plots", "heatmap.svg"),
        ]
        for parts in expected:
            self.assertTrue(os.path.isfile(os.path.join(self.output, *parts)), os.path.join(*parts))

        ledger_path = os.path.join(self.temp_dir, "corpus", "fakes", "leak_ledger.json")
        with open(ledger_path, encoding="utf-8") as f:
            self.assertEqual(len(json.load(f)), 6)

    def test_curation_counts(self):
        summary = self._read_json("manifests", "curation_summary.json")
        self.assertEqual(summary["real"]["input"], 6)
        self.assertEqual(summary["real"]["blink"], 0)
        self.assertEqual(summary["snapshots"]["01"]["input"], 3)

    def test_report_content(self):
        report = self._read_json("reports", "leakage_report.json")
        self.assertTrue(report["verdict"]["leak"])
        self.assertEqual(report["verdict"]["far"], "1e-01")
        self.assertEqual(report["far_thresholds"][1]["status"], "UnattainableFar")
        self.assertEqual([item["snapshot"] for item in report["snapshots"]], [1, 2])
        for item in report["snapshots"]:
            self.assertGreaterEqual(item["leak_recall"], 0.5)
            self.assertTrue(item["flagged_pairs"])
        self.assertEqual(report["heatmap"][0], ["far", "snapshot_01", "snapshot_02"])

    def test_report_is_reproducible(self):
        path = os.path.join(self.output, "reports", "leakage_report.json")
        with open(path, "rb") as f:
            first = f.read()
        pipeline = AuditPipeline(RunConfig(self.config_path))
        self.assertEqual(pipeline.match().exit_code, 0)
        self.assertEqual(pipeline.report().exit_code, EXIT_LEAK)
        with open(path, "rb") as f:
            self.assertEqual(f.read(), first)


class TestPipelineVariants(unittest.TestCase):
    """闭眼帧、镜像增广与进程数"""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.mkdtemp()
        cls.outputs, cls.exit_codes = {}, {}
        for workers in (1, 2):
            root = os.path.join(cls.temp_dir, f"workers_{workers}")
            os.makedirs(root)
            config_path = os.path.join(root, "variant.ini")
            with open(config_path, "w", encoding="utf-8") as f:
                f.write(VARIANT_CONFIG.format(root=root.replace(os.sep, "/")))
            cls.exit_codes[workers] = main(["run-all", "--config", config_path, "--workers", str(workers)])
            _reset_logging()
            cls.outputs[workers] = os.path.join(root, "output")
        cls.config = RunConfig(config_path)

    @classmethod
    def tearDownClass(cls):
        _reset_logging()
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def _read_bytes(self, workers, *parts):
        with open(os.path.join(self.outputs[workers], *parts), "rb") as f:
            return f.read()

    def _score_files(self, workers):
        scores_dir = os.path.join(self.outputs[workers], "scores")
        paths = []
        for directory, _, files in os.walk(scores_dir):
            paths.extend(os.path.relpath(os.path.join(directory, name), scores_dir)
                         for name in files if name.endswith(".csv"))
        return sorted(paths)

    def test_runs_complete(self):
        self.assertIn(self.exit_codes[1], (EXIT_CLEAN, EXIT_LEAK))
        self.assertEqual(self.exit_codes[1], self.exit_codes[2])

    def test_blink_count_matches_planted_frames(self):
        summary = json.loads(self._read_bytes(1, "manifests", "curation_summary.json"))
        seed = self.config.stage_seed("real")
        expected = sum(planted_blink(seed, identity, frame, 0.3)
                       for identity in range(3) for frame in range(4))
        real = summary["real"]
        self.assertEqual(real["input"], 12)
        self.assertEqual(real["blink"], expected)
        self.assertEqual(real["blink"] + real["border"] + real["kept"], real["input"])

    def test_mirrored_copies_never_scored(self):
        summary = json.loads(self._read_bytes(1, "manifests", "curation_summary.json"))
        mirrored = CorpusManifest.load_from_file(os.path.join(self.outputs[1], "manifests", REAL_MIRRORED))
        self.assertEqual(len(mirrored), summary["real"]["kept"])
        self.assertEqual(summary["real"]["mirrored_added"], summary["real"]["kept"])
        self.assertTrue(all(record.mirrored for record in mirrored))

        files = self._score_files(1)
        self.assertIn("genuine.csv", files)
        for name in files:
            with open(os.path.join(self.outputs[1], "scores", name), encoding="utf-8", newline="") as f:
                for row in csv.DictReader(f):
                    self.assertFalse(row["id_a"].endswith("_m"), row["id_a"])
                    self.assertFalse(row["id_b"].endswith("_m"), row["id_b"])

        templates = os.listdir(os.path.join(self.outputs[1], "templates", "real"))
        self.assertFalse([name for name in templates if "_m." in name])

    def test_worker_count_does_not_change_outputs(self):
        files = self._score_files(1)
        self.assertEqual(files, self._score_files(2))
        for name in files:
            self.assertEqual(self._read_bytes(1, "scores", name), self._read_bytes(2, "scores", name), name)
        for parts in (("reports", "leakage_report.json"), ("reports", "heatmap.csv"),
                      ("manifests", "curation_summary.json"), ("manifests", "real_curated.jsonl")):
            self.assertEqual(self._read_bytes(1, *parts), self._read_bytes(2, *parts), os.path.join(*parts))


class TestCurateFallback(unittest.TestCase):
    """掩码没有瞳孔空洞时由积分微分算子定位瞳孔"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.config = RunConfig()
        self.config.apply_overrides(output_dir=os.path.join(self.temp_dir, "output"))
        self.config.set("Paths", "real_corpus", os.path.join(self.temp_dir, "real", "manifest.jsonl"))
        self.config.set("Paths", "fake_corpora", os.path.join(self.temp_dir, "fakes"))

    def tearDown(self):
        _reset_logging()
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_hole_less_mask_is_located(self):
        entry = render_real_frame(5, 0, 0, 1)
        filled = replace(entry, mask=SegMask(ndimage.binary_fill_holes(entry.mask.bits)))
        self.assertIsNone(pupil_center_from_mask(filled.mask))

        real_dir = os.path.join(self.temp_dir, "real")
        manifest = CorpusManifest(real_dir)
        manifest.add_record(save_entry(filled, real_dir, f"images/{filled.identity}"))
        manifest.save_to_file(self.config.real_corpus)

        result = AuditPipeline(self.config).curate()
        self.assertTrue(result.success, result.message)
        self.assertEqual(result.counts["real"]["kept"], 1)
        self.assertEqual(result.counts["real"]["border"], 0)


class TestStageErrors(unittest.TestCase):
    """阶段输入缺失与配置错误"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.config = RunConfig()
        self.config.apply_overrides(output_dir=os.path.join(self.temp_dir, "output"))
        self.config.set("Paths", "real_corpus", os.path.join(self.temp_dir, "real", "manifest.jsonl"))
        self.config.set("Paths", "fake_corpora", os.path.join(self.temp_dir, "fakes"))

    def tearDown(self):
        _reset_logging()
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_missing_previous_stage(self):
        pipeline = AuditPipeline(self.config)
        for stage in (pipeline.curate, pipeline.extract, pipeline.match, pipeline.report):
            result = stage()
            self.assertFalse(result.success)
            self.assertEqual(result.exit_code, EXIT_ERROR)

    def test_invalid_parameters(self):
        self.config.set("Matcher", "orientation", "sideways")
        result = AuditPipeline(self.config).match()
        self.assertFalse(result.success)
        self.assertIn("sideways", result.message)

    def test_missing_config_file(self):
        self.assertEqual(main(["report", "--config", os.path.join(self.temp_dir, "missing.ini")]), EXIT_ERROR)

    def test_snapshot_names(self):
        self.assertEqual(snapshot_name(3), "snapshot_03")
        self.assertEqual(snapshot_number("/x/snapshot_12.jsonl"), 12)
        self.assertEqual(snapshot_number("snapshot_04"), 4)


if __name__ == '__main__':
    unittest.main()
