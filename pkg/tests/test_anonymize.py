import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from intersection_edge import anonymize
from intersection_edge.anonymize import (
    FrameBuffer,
    RegionOutOfBounds,
    blur_boxes_for_detections,
    blur_regions,
    coverage_oracle,
    evaluate_recall,
    is_anonymized,
)
from intersection_edge.detemu import Detection
from intersection_edge.scenesim.camera import TruthRegion
from intersection_edge.types import ObjClass


def _region(box, kind="face", identifiable=True):
    return TruthRegion(0, kind, box, identifiable)


def _blur_oracle(src, x0, y0, x1, y1, k):
    out = src.copy()
    half = k // 2
    for y in range(y0, y1):
        for x in range(x0, x1):
            win = src[max(y - half, y0):min(y + half + 1, y1), max(x - half, x0):min(x + half + 1, x1)].astype(int)
            out[y, x] = (2 * win.sum() + win.size) // (2 * win.size)
    return out


class TestBlur:
    def test_uniform(self):
        f = FrameBuffer.from_array(np.full((40, 40), 77, np.uint8))
        assert np.array_equal(blur_regions(f, [(5, 5, 30, 30)]).pixels, f.pixels)

    def test_no_regions(self):
        a = np.random.default_rng(0).integers(0, 256, (20, 30), dtype=np.uint8)
        out = blur_regions(FrameBuffer.from_array(a), [])
        assert np.array_equal(out.pixels, a) and out.pixels is not a

    def test_single_white_pixel(self):
        a = np.zeros((15, 15), np.uint8)
        a[7, 7] = 255
        out = blur_regions(FrameBuffer.from_array(a), [(0, 0, 15, 15)], kernel=15)
        assert out.pixels[7, 7] == 1 == round(255 / 225)

    def test_matches_oracle(self):
        a = np.random.default_rng(1).integers(0, 256, (30, 40), dtype=np.uint8)
        out = blur_regions(FrameBuffer.from_array(a), [(3, 4, 25, 21)], kernel=5)
        assert np.array_equal(out.pixels, _blur_oracle(a, 3, 4, 25, 21, 5))

    def test_later_region_wins_and_reads_original(self):
        a = np.random.default_rng(2).integers(0, 256, (30, 30), dtype=np.uint8)
        out = blur_regions(FrameBuffer.from_array(a), [(0, 0, 20, 20), (10, 10, 30, 30)], kernel=3)
        want = _blur_oracle(a, 0, 0, 20, 20, 3)
        second = _blur_oracle(a, 10, 10, 30, 30, 3)
        want[10:30, 10:30] = second[10:30, 10:30]
        assert np.array_equal(out.pixels, want)

    def test_clipped_region_warns(self):
        f = FrameBuffer.from_array(np.zeros((10, 10), np.uint8))
        log = []
        with pytest.warns(RegionOutOfBounds):
            blur_regions(f, [(-5, 2, 4, 8)], log=log)
        assert log and "clipped" in log[0]

    def test_bad_kernel(self):
        with pytest.raises(ValueError):
            blur_regions(FrameBuffer.from_array(np.zeros((4, 4), np.uint8)), [], kernel=4)

    def test_pgm_round_trip(self, tmp_path):
        a = np.arange(60, dtype=np.uint8).reshape(6, 10)
        FrameBuffer.from_array(a).write(tmp_path / "f.pgm")
        assert np.array_equal(FrameBuffer.read(tmp_path / "f.pgm").pixels, a)


class TestRecall:
    def test_full_cover(self):
        regs = [_region((0, 0, 20, 20)), _region((30, 30, 50, 45), "license_plate")]
        st_ = evaluate_recall([(0, 0, 60, 60)], regs)
        assert all(s.visible_recall == 1.0 and s.total_recall == 1.0 for s in st_.values())

    def test_74_percent_is_miss(self):
        s = evaluate_recall([(0, 0, 74, 1)], [_region((0, 0, 100, 1))], area_floor_px=1)["face"]
        assert s.eligible == 1 and s.anonymized == 0
        s = evaluate_recall([(0, 0, 75, 1)], [_region((0, 0, 100, 1))], area_floor_px=1)["face"]
        assert s.anonymized == 1

    def test_floor(self):
        s = evaluate_recall([], [_region((0, 0, 9, 11), identifiable=False)])["face"]
        assert s.total == 1 and s.eligible == 0 and s.total_recall == 1.0
        s = evaluate_recall([], [_region((0, 0, 10, 10), identifiable=False)])["face"]
        assert s.eligible == 1 and s.total_recall == 0.0

    def test_is_anonymized_integer_rule(self):
        assert is_anonymized(3, 4) and not is_anonymized(2, 4)
        assert is_anonymized(75, 100) and not is_anonymized(74, 100)
        assert is_anonymized(2, 3, 0.6) and not is_anonymized(1, 3, 0.6)

    @given(st.lists(st.tuples(st.integers(-5, 45), st.integers(-5, 45), st.integers(1, 25), st.integers(1, 25)),
                    max_size=6),
           st.tuples(st.integers(0, 30), st.integers(0, 30), st.integers(1, 20), st.integers(1, 20)))
    def test_coverage_matches_pixel_oracle(self, rects, target):
        rects = [(x, y, x + w, y + h) for x, y, w, h in rects]
        tx, ty, tw, th = target
        box = (tx, ty, min(tx + tw, 50), min(ty + th, 50))
        from intersection_edge import kernels

        got = kernels.union_coverage(box, np.array(rects, dtype=np.int64).reshape(-1, 4))
        assert got == coverage_oracle(rects, box, 50, 50)

    def test_detection_blur_boxes(self):
        ped = Detection(0, (100, 100, 120, 170), ObjClass.PEDESTRIAN, 0.9)
        car = Detection(0, (200, 200, 290, 236), ObjClass.VEHICLE, 0.9)
        bike = Detection(0, (300, 300, 310, 330), ObjClass.BICYCLE, 0.9)
        rects = blur_boxes_for_detections([ped, car, bike], 832, 832)
        assert len(rects) == 3
        face = rects[0]
        assert face[1] <= 100 and face[3] >= 110 and face[0] >= 100 and face[2] <= 120
        assert rects[1][0] <= 200 and rects[2][2] >= 290

    def test_audit_csv(self, tmp_path):
        stats = evaluate_recall([(0, 0, 20, 20)], [_region((0, 0, 20, 20))])
        anonymize.write_audit_csv(tmp_path / "a.csv", stats)
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert lines[0] == "kind,total,eligible,anonymized,visible_recall,total_recall" and len(lines) == 3
