"""
测试合成数据与生成器模拟
"""

import unittest

import numpy as np

from src.core.encoding import build_filter_bank, rubber_sheet, encode
from src.core.matching import ShiftRange, fractional_hd
from src.core.segmentation import texture_energy
from src.core.synth import (
    IdentitySpec, CaptureSpec, render_iris, identity_name, stimulus_dilation, render_real_frame,
    training_crops, GeneratorModel, artifact_strength, apply_fidelity, planted_source,
    sample_generator, leak_ledger, snapshot_fidelity, planted_blink, polar_texture,
)
from src.models.corpus_data import CorpusEntry, Origin
from src.models.imaging import RawImage, SegMask
from src.utils.errors import SpecError


def small_corpus(count: int = 3, mirrored: bool = False):
    entries = []
    for frame in range(count):
        pixels = np.random.default_rng(frame).integers(20, 230, (64, 64), dtype=np.uint8)
        mask = SegMask(np.ones((64, 64), dtype=bool))
        entries.append(CorpusEntry(RawImage(pixels), "S01-L", frame, Origin.real(), mask, mirrored))
    return entries


def ground_truth_code(image, segmentation, bank):
    """按渲染真值分割归一化并编码"""
    return encode(rubber_sheet(image, segmentation, 64, 256), bank)


def mean_pairwise_hd(templates, max_shift: int = 0) -> float:
    values = []
    for i, a in enumerate(templates):
        for b in templates[i + 1:]:
            values.append(fractional_hd(a, b, ShiftRange(max_shift)).value)
    return float(np.mean(values))


class TestRender(unittest.TestCase):
    """渲染测试"""

    def test_deterministic(self):
        first = render_iris(IdentitySpec(5), CaptureSpec(noise_seed=3))
        second = render_iris(IdentitySpec(5), CaptureSpec(noise_seed=3))
        np.testing.assert_array_equal(first.image.pixels, second.image.pixels)
        other = render_iris(IdentitySpec(6), CaptureSpec(noise_seed=3))
        self.assertFalse(np.array_equal(first.image.pixels, other.image.pixels))

    def test_ground_truth(self):
        rendered = render_iris(IdentitySpec(5), CaptureSpec())
        self.assertEqual(rendered.image.pixels.shape, (512, 512))
        np.testing.assert_array_equal(rendered.mask.bits, rendered.segmentation.annulus())
        self.assertEqual(rendered.segmentation.pupil.r, 40.0)
        self.assertEqual(rendered.segmentation.iris.r, 110.0)

        dilated = render_iris(IdentitySpec(5), CaptureSpec(dilation_factor=1.5))
        self.assertEqual(dilated.segmentation.pupil.r, 60.0)
        self.assertLess(int(dilated.mask.bits.sum()), int(rendered.mask.bits.sum()))

    def test_eyelid_closure_reduces_mask(self):
        open_eye = render_iris(IdentitySpec(5), CaptureSpec())
        half = render_iris(IdentitySpec(5), CaptureSpec(eyelid_closure=0.5))
        closed = render_iris(IdentitySpec(5), CaptureSpec(eyelid_closure=1.0))
        self.assertLess(int(half.mask.bits.sum()), int(open_eye.mask.bits.sum()))
        self.assertLess(int(closed.mask.bits.sum()), int(half.mask.bits.sum()))

    def test_spec_errors(self):
        with self.assertRaises(SpecError):
            IdentitySpec(1, iris_radius=30.0, base_pupil_radius=40.0)
        with self.assertRaises(SpecError):
            render_iris(IdentitySpec(1), CaptureSpec(dilation_factor=3.0))
        with self.assertRaises(SpecError):
            render_iris(IdentitySpec(1), CaptureSpec(center=(50.0, 50.0)))
        with self.assertRaises(SpecError):
            render_iris(IdentitySpec(1), CaptureSpec(eyelid_closure=1.5))


class TestRenderedCodes(unittest.TestCase):
    """渲染纹理的编码统计"""

    @classmethod
    def setUpClass(cls):
        cls.bank = build_filter_bank(17)

    def test_independent_identities_near_half(self):
        templates = []
        for i in range(15):
            rendered = render_iris(IdentitySpec(texture_seed=300 + i), CaptureSpec(noise_seed=i))
            templates.append(ground_truth_code(rendered.image, rendered.segmentation, self.bank))
        self.assertAlmostEqual(mean_pairwise_hd(templates), 0.5, delta=0.03)

    def test_dilation_keeps_identity(self):
        identity = IdentitySpec(texture_seed=300)
        narrow = render_iris(identity, CaptureSpec(dilation_factor=1.0, noise_seed=1))
        wide = render_iris(identity, CaptureSpec(dilation_factor=1.4, noise_seed=2))
        other = render_iris(IdentitySpec(texture_seed=301), CaptureSpec(noise_seed=3))
        a = ground_truth_code(narrow.image, narrow.segmentation, self.bank)
        b = ground_truth_code(wide.image, wide.segmentation, self.bank)
        c = ground_truth_code(other.image, other.segmentation, self.bank)
        genuine = fractional_hd(a, b, ShiftRange(2)).value
        self.assertLess(genuine, 0.35)
        self.assertLess(genuine, fractional_hd(a, c, ShiftRange(2)).value)


class TestRealCorpus(unittest.TestCase):
    """真实语料模拟测试"""

    def test_identity_names(self):
        self.assertEqual([identity_name(i) for i in range(4)], ["S01-L", "S01-R", "S02-L", "S02-R"])

    def test_stimulus_dilation(self):
        self.assertAlmostEqual(stimulus_dilation(0, 20), 1.3)
        values = [stimulus_dilation(f, 20) for f in range(20)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_frames_and_crops(self):
        frames = [render_real_frame(9, 1, frame, 3) for frame in range(3)]
        self.assertEqual(frames[0].image.pixels.shape, (576, 768))
        self.assertEqual(frames[0].identity, "S01-R")
        np.testing.assert_array_equal(frames[1].image.pixels, render_real_frame(9, 1, 1, 3).image.pixels)

        crops = training_crops(frames)
        self.assertEqual(len(crops), 3)
        for crop in crops:
            self.assertEqual(crop.image.pixels.shape, (512, 512))

    def test_planted_blink_frames(self):
        open_area = int(render_real_frame(9, 0, 0, 20).mask.bits.sum())
        blinks = 0
        for frame in range(12):
            planted = planted_blink(9, 0, frame, 0.5)
            entry = render_real_frame(9, 0, frame, 20, blink_rate=0.5)
            self.assertEqual(int(entry.mask.bits.sum()) < 0.3 * open_area, planted)
            blinks += int(planted)
        self.assertGreater(blinks, 0)
        self.assertLess(blinks, 12)
        self.assertFalse(planted_blink(9, 0, 0, 0.0))


class TestGenerator(unittest.TestCase):
    """生成器模拟测试"""

    def test_fidelity_levels(self):
        self.assertEqual(artifact_strength(1), 1.0)
        self.assertEqual(artifact_strength(14), 0.0)
        with self.assertRaises(SpecError):
            artifact_strength(0)

        image = small_corpus(1)[0].image
        clean = apply_fidelity(image, 14, seed=1)
        np.testing.assert_array_equal(clean.pixels, image.pixels)
        self.assertIsNot(clean.pixels, image.pixels)

        degraded = apply_fidelity(image, 1, seed=1)
        self.assertFalse(np.array_equal(degraded.pixels, image.pixels))
        np.testing.assert_array_equal(degraded.pixels, apply_fidelity(image, 1, seed=1).pixels)

    def test_texture_energy_grows_with_fidelity(self):
        levels = (1, 4, 7, 10, 14)
        energies = {level: [] for level in levels}
        for i in range(50):
            capture = CaptureSpec(width=256, height=256, noise_seed=i)
            rendered = render_iris(IdentitySpec(texture_seed=400 + i), capture)
            usable = rendered.mask.bits
            for level in levels:
                energies[level].append(texture_energy(apply_fidelity(rendered.image, level, seed=i), usable))
        means = [float(np.mean(energies[level])) for level in levels]
        self.assertEqual(means, sorted(means))
        self.assertLess(means[0], means[-1])

    def test_low_fidelity_fakes_collapse_toward_prototype(self):
        bank = build_filter_bank(17)
        prototype = polar_texture(IdentitySpec(texture_seed=99))

        def fakes(level):
            templates = []
            for i in range(6):
                rendered = render_iris(IdentitySpec(texture_seed=500 + i), CaptureSpec(noise_seed=i),
                                       prototype, artifact_strength(level))
                image = apply_fidelity(rendered.image, level, seed=i)
                templates.append(ground_truth_code(image, rendered.segmentation, bank))
            return templates

        self.assertLess(mean_pairwise_hd(fakes(1)), mean_pairwise_hd(fakes(14)) - 0.05)

    def test_snapshot_fidelity(self):
        self.assertEqual([snapshot_fidelity(s) for s in (1, 7, 14)], [1, 7, 14])
        self.assertEqual(snapshot_fidelity(1, 5), 1)
        self.assertEqual(snapshot_fidelity(5, 5), 14)
        self.assertEqual(snapshot_fidelity(1, 1), 14)

    def test_invalid_model(self):
        with self.assertRaises(SpecError):
            GeneratorModel(small_corpus(), 1.5, 14, seed=0)
        with self.assertRaises(SpecError):
            GeneratorModel(small_corpus(), 0.5, 0, seed=0)
        with self.assertRaises(SpecError):
            sample_generator(GeneratorModel([], 0.5, 14, seed=0), 0)

    def test_full_memorization(self):
        corpus = small_corpus()
        model = GeneratorModel(corpus, 1.0, 14, seed=3, snapshot_id=2)
        ledger = leak_ledger(model, 5)
        self.assertEqual([row["seed"] for row in ledger], [0, 1, 2, 3, 4])
        self.assertEqual(ledger[0]["fake_id"], "s02_seed0000")
        sources = {entry.entry_id: entry for entry in corpus}
        for row in ledger:
            self.assertIn(row["source_id"], sources)
            self.assertEqual(row["source_identity"], "S01-L")

            fake = sample_generator(model, row["seed"])
            source = sources[row["source_id"]]
            diff = np.abs(fake.image.as_float() - source.image.as_float())
            self.assertLess(diff.mean(), 3.0)
            self.assertEqual(fake.origin, Origin.synthetic(2, row["seed"]))

    def test_no_memorization(self):
        model = GeneratorModel(small_corpus(), 0.0, 14, seed=3, snapshot_id=2)
        self.assertEqual(leak_ledger(model, 20), [])
        self.assertIsNone(planted_source(model, 0))
        fake = sample_generator(model, 3)
        self.assertEqual(fake.image.pixels.shape, (512, 512))
        self.assertEqual(fake.entry_id, "s02_seed0003")
        self.assertEqual(fake.identity, "")
        np.testing.assert_array_equal(fake.image.pixels, sample_generator(model, 3).image.pixels)

    def test_mirrored_entries_never_leak(self):
        model = GeneratorModel(small_corpus(mirrored=True), 1.0, 14, seed=3)
        self.assertEqual(leak_ledger(model, 5), [])

    def test_leak_decision_independent_of_fidelity(self):
        corpus = small_corpus()
        low = GeneratorModel(corpus, 0.3, 1, seed=8)
        high = GeneratorModel(corpus, 0.3, 14, seed=8)
        self.assertEqual(leak_ledger(low, 50), leak_ledger(high, 50))


if __name__ == '__main__':
    unittest.main()
