"""
测试语料整理功能
"""

import unittest
import tempfile
import os
import shutil

import numpy as np

from src.core.corpus import (
    mask_coverage, default_blink_threshold, blink_filter, center_crop, mirror_entry,
    mirror_augment, iso_pad_width, iso_frame, pupil_center_from_mask, curate_entries,
    load_entry, save_entry, PAD_GRAY,
)
from src.models.corpus_data import CorpusEntry, CorpusManifest, Origin
from src.models.imaging import RawImage, SegMask
from src.utils.errors import MissingMask, BorderViolation, DimensionMismatch

SIZE = 600


def ring_mask(cx: float, cy: float, inner: float = 50, outer: float = 100, size: int = SIZE) -> SegMask:
    yy, xx = np.mgrid[0:size, 0:size]
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return SegMask((d2 >= inner ** 2) & (d2 <= outer ** 2))


def make_entry(frame: int, mask: SegMask, identity: str = "S01-L") -> CorpusEntry:
    pixels = np.random.default_rng(frame).integers(0, 256, (SIZE, SIZE), dtype=np.uint8)
    return CorpusEntry(RawImage(pixels), identity, frame, Origin.real(), mask)


class TestBlinkFilter(unittest.TestCase):
    """闭眼过滤测试"""

    def test_coverage_and_default_threshold(self):
        full = make_entry(0, ring_mask(300, 300))
        thin = make_entry(1, ring_mask(300, 300, 50, 52))
        self.assertEqual(mask_coverage(full.mask), int(full.mask.bits.sum()))
        expected = int(np.ceil(0.3 * mask_coverage(full.mask)))
        self.assertEqual(default_blink_threshold([thin, full]), expected)

    def test_inclusive_threshold(self):
        entries = [make_entry(i, ring_mask(300, 300, 50, 60 + 10 * i)) for i in range(3)]
        threshold = mask_coverage(entries[1].mask)
        kept, discarded = blink_filter(entries, threshold)
        self.assertEqual([e.frame_index for e in kept], [1, 2])
        self.assertEqual([e.frame_index for e in discarded], [0])

        kept, _ = blink_filter(entries, 0)
        self.assertEqual(len(kept), 3)

    def test_missing_mask(self):
        entry = make_entry(0, None)
        with self.assertRaises(MissingMask):
            blink_filter([entry], 10)
        with self.assertRaises(MissingMask):
            default_blink_threshold([entry])


class TestCrop(unittest.TestCase):
    """裁剪、镜像与画幅测试"""

    def setUp(self):
        self.entry = make_entry(3, ring_mask(300, 300))

    def test_pupil_center_from_mask(self):
        self.assertEqual(pupil_center_from_mask(self.entry.mask), (300.0, 300.0))
        solid = SegMask(ring_mask(300, 300, 0, 100).bits)
        self.assertIsNone(pupil_center_from_mask(solid))

    def test_center_crop_preserves_pixels(self):
        cropped = center_crop(self.entry, (300.0, 300.0), 512)
        self.assertEqual(cropped.image.pixels.shape, (512, 512))
        np.testing.assert_array_equal(cropped.image.pixels, self.entry.image.pixels[44:556, 44:556])
        np.testing.assert_array_equal(cropped.mask.bits, self.entry.mask.bits[44:556, 44:556])
        self.assertEqual(pupil_center_from_mask(cropped.mask), (256.0, 256.0))
        self.assertEqual(cropped.entry_id, self.entry.entry_id)

    def test_border_violation(self):
        with self.assertRaises(BorderViolation):
            center_crop(self.entry, (60.0, 300.0), 512)
        with self.assertRaises(BorderViolation):
            center_crop(self.entry, (300.0, 345.0), 512)

    def test_mirror(self):
        mirrored = mirror_entry(self.entry)
        self.assertTrue(mirrored.mirrored)
        self.assertTrue(mirrored.entry_id.endswith("_m"))
        self.assertEqual(mirrored.image.pixels[7, 0], self.entry.image.pixels[7, SIZE - 1])
        np.testing.assert_array_equal(mirrored.mask.bits, self.entry.mask.bits[:, ::-1])

        twice = mirror_entry(mirrored)
        self.assertFalse(twice.mirrored)
        np.testing.assert_array_equal(twice.image.pixels, self.entry.image.pixels)

    def test_mirror_augment_doubles(self):
        corpus = [self.entry, make_entry(4, ring_mask(300, 300))]
        augmented = mirror_augment(corpus)
        self.assertEqual(len(augmented), 4)
        self.assertEqual([e.mirrored for e in augmented], [False, False, True, True])
        self.assertEqual(len({e.entry_id for e in augmented}), 4)

    def test_iso_frame(self):
        self.assertEqual(iso_pad_width(512), 86)
        framed = iso_frame(RawImage(np.zeros((512, 512), dtype=np.uint8)))
        self.assertEqual(framed.pixels.shape, (480, 640))
        self.assertEqual(int(framed.pixels[240, 0]), PAD_GRAY)
        self.assertEqual(int(framed.pixels[240, 639]), PAD_GRAY)
        self.assertEqual(int(framed.pixels[240, 320]), 0)

        with self.assertRaises(DimensionMismatch):
            iso_frame(RawImage(np.zeros((500, 512), dtype=np.uint8)))


class TestCuration(unittest.TestCase):
    """整理流程测试"""

    def setUp(self):
        self.entries = [make_entry(i, ring_mask(300, 300)) for i in range(10)]
        self.entries += [make_entry(10 + i, ring_mask(300, 300, 50, 52)) for i in range(3)]
        self.entries.append(make_entry(13, ring_mask(60, 300)))

    def test_counts(self):
        outcome = curate_entries(self.entries)
        self.assertEqual(outcome.counts, {"input": 14, "blink": 3, "border": 1, "kept": 10})
        self.assertEqual([e.frame_index for e in outcome.kept], list(range(10)))
        for entry in outcome.kept:
            self.assertEqual(entry.image.pixels.shape, (512, 512))
        self.assertEqual(outcome.threshold, default_blink_threshold(self.entries))

    def test_explicit_threshold(self):
        outcome = curate_entries(self.entries, threshold=0)
        self.assertEqual(outcome.counts["blink"], 0)
        self.assertEqual(outcome.counts["kept"], 13)

    def test_locate_fallback(self):
        solid = make_entry(0, ring_mask(300, 300, 0, 100))
        self.assertEqual(curate_entries([solid]).counts["border"], 1)
        outcome = curate_entries([solid], locate=lambda image: (300.0, 300.0))
        self.assertEqual(outcome.counts["kept"], 1)


class TestEntryIO(unittest.TestCase):
    """条目读写测试"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_save_and_load(self):
        entries = [make_entry(2, ring_mask(300, 300), "S02-R"), make_entry(1, ring_mask(300, 300), "S01-L")]
        manifest = CorpusManifest(self.temp_dir)
        for entry in entries:
            manifest.add_record(save_entry(entry, self.temp_dir, "real"))
        path = os.path.join(self.temp_dir, "manifest.jsonl")
        manifest.save_to_file(path)

        loaded = CorpusManifest.load_from_file(path)
        self.assertEqual([r.identity for r in loaded], ["S01-L", "S02-R"])
        self.assertEqual(loaded[0].path, "real/S01-L_f00001.png")

        entry = load_entry(loaded, loaded[1])
        np.testing.assert_array_equal(entry.image.pixels, entries[0].image.pixels)
        np.testing.assert_array_equal(entry.mask.bits, entries[0].mask.bits)
        self.assertEqual(entry.entry_id, "S02-R_f00002")

    def test_synthetic_entry_without_mask(self):
        fake = CorpusEntry(RawImage(np.full((64, 64), 9, dtype=np.uint8)), "", 0, Origin.synthetic(3, 17))
        record = save_entry(fake, self.temp_dir, "snapshot_03")
        self.assertIsNone(record.mask_path)
        self.assertEqual(record.entry_id, "s03_seed0017")

        manifest = CorpusManifest(self.temp_dir)
        entry = load_entry(manifest, record)
        self.assertFalse(entry.origin.is_real)
        self.assertEqual(entry.origin.snapshot_id, 3)
        self.assertIsNone(entry.mask)


if __name__ == '__main__':
    unittest.main()
