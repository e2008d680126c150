import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from intersection_edge import detemu
from intersection_edge.detemu import (
    DEFAULT_NOISE,
    ZERO_NOISE,
    Detection,
    EmptyTruth,
    LatencyModel,
    MissCurve,
    NoiseProfile,
    average_precision,
    emulate,
    evaluate_ap,
    inference_latency,
    read_detections,
    sweep_latency,
    with_miss_floor,
    write_detections,
)
from intersection_edge.geometry import SceneMask
from intersection_edge.types import ObjClass

PED, VEH = ObjClass.PEDESTRIAN, ObjClass.VEHICLE


def _rows(n=5, seed=0):
    r = np.random.default_rng(seed)
    out = []
    for i in range(n):
        x, y = r.uniform(50, 700, 2)
        w, h = r.uniform(10, 90, 2)
        out.append((i + 1, (x, y, x + w, y + h), int(VEH if i % 2 else PED)))
    return out


def _ap_oracle(flags, n_truth):
    # precision envelope walked point by point
    tp = fp = 0
    pts = []
    for f in flags:
        tp += f
        fp += 1 - f
        pts.append((tp / n_truth, tp / (tp + fp)))
    ap, prev_r = 0.0, 0.0
    for k, (r, _) in enumerate(pts):
        if r > prev_r:
            ap += (r - prev_r) * max(p for _, p in pts[k:])
            prev_r = r
    return ap


class TestDetection:
    def test_rejects_bad_box(self):
        with pytest.raises(ValueError):
            Detection(0, (5, 5, 5, 9), VEH, 0.5)

    def test_rejects_bad_confidence(self):
        with pytest.raises(ValueError):
            Detection(0, (0, 0, 5, 9), VEH, 1.5)


class TestEmulate:
    def test_zero_noise_identity(self):
        rows = _rows()
        dets = emulate(rows, ZERO_NOISE, 3)
        assert [(d.truth_id, d.box, int(d.cls), d.confidence) for d in dets] == [(i, b, c, 1.0) for i, b, c in rows]

    def test_full_miss_leaves_only_false_positives(self):
        prof = with_miss_floor(DEFAULT_NOISE, 1.0)
        for f in range(30):
            dets = emulate(_rows(), prof, 1, f)
            assert all(d.truth_id is None for d in dets)

    def test_full_miss_no_fp_is_empty(self):
        prof = NoiseProfile(miss={c: MissCurve(1.0) for c in ObjClass})
        assert emulate(_rows(), prof, 1) == []

    def test_deterministic(self):
        a = emulate(_rows(8), DEFAULT_NOISE, 11, 42)
        b = emulate(_rows(8), DEFAULT_NOISE, 11, 42)
        assert a == b
        assert a != emulate(_rows(8), DEFAULT_NOISE, 11, 43) or not a

    def test_boxes_inside_frame(self):
        for f in range(50):
            for d in emulate(_rows(10, f), DEFAULT_NOISE, 2, f, (832, 832)):
                x0, y0, x1, y1 = d.box
                assert 0 <= x0 < x1 <= 832 and 0 <= y0 < y1 <= 832
                assert 0.0 <= d.confidence <= 1.0

    def test_fp_respects_mask(self):
        bm = np.zeros((100, 100), bool)
        bm[:, 50:] = True
        mask = SceneMask(100, 100, bm)
        prof = NoiseProfile(fp_per_frame=5.0)
        for f in range(40):
            for d in emulate([], prof, 0, f, (100, 100), mask):
                assert mask.contains((d.box[0] + d.box[2]) / 2, (d.box[1] + d.box[3]) / 2)

    def test_miss_curve_shape(self):
        c = MissCurve(0.05, 100.0, 3.0)
        assert float(c(100.0)) == pytest.approx(0.05 + 0.95 / 2)
        assert float(c(1e6)) == pytest.approx(0.05, abs=1e-6)
        assert float(c(1.0)) > 0.99
        assert np.all(np.diff(c(np.linspace(10, 5000, 50))) < 0)

    def test_invalid_profile(self):
        with pytest.raises(ValueError):
            NoiseProfile(fp_per_frame=-1)
        with pytest.raises(ValueError):
            NoiseProfile(miss={PED: MissCurve(1.5)})


class TestAP:
    def test_identical(self):
        truths = [(0, (0, 0, 10, 10), PED), (0, (20, 20, 40, 40), VEH)]
        dets = [Detection(f, b, c, 1.0) for f, b, c in truths]
        r = evaluate_ap(dets, truths)
        assert r["ap"] == {PED: 1.0, VEH: 1.0} and r["map"] == 1.0

    def test_no_detections(self):
        assert evaluate_ap([], [(0, (0, 0, 10, 10), PED)])["ap"][PED] == 0.0

    def test_hand_walk_five_sixths(self):
        truths = [(0, (0, 0, 10, 10), PED), (1, (0, 0, 10, 10), PED)]
        dets = [Detection(0, (0, 0, 10, 10), PED, 0.9), Detection(0, (50, 50, 60, 60), PED, 0.8),
                Detection(1, (0, 0, 10, 10), PED, 0.7)]
        assert evaluate_ap(dets, truths)["ap"][PED] == pytest.approx(5 / 6, abs=1e-12)

    def test_duplicate_is_false_positive(self):
        truths = [(0, (0, 0, 10, 10), PED)]
        dets = [Detection(0, (0, 0, 10, 10), PED, 0.9), Detection(0, (0, 0, 10, 10.5), PED, 0.8)]
        assert evaluate_ap(dets, truths)["ap"][PED] == 1.0
        dets = [Detection(0, (0, 0, 10, 10.5), PED, 0.95)] + dets[:1]
        assert evaluate_ap(dets, truths)["ap"][PED] == 1.0

    def test_iou_threshold_inclusive(self):
        truths = [(0, (0, 0, 10, 10), PED)]
        # IoU exactly 0.5
        assert evaluate_ap([Detection(0, (0, 0, 10, 5), PED, 0.9)], truths)["ap"][PED] == 1.0

    def test_empty_truth(self):
        with pytest.raises(EmptyTruth):
            evaluate_ap([Detection(0, (0, 0, 1, 1), PED, 0.5)], [])
        with pytest.raises(EmptyTruth):
            average_precision(np.array([1]), 0)

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.integers(0, 10))
    def test_matches_oracle(self, flags, extra):
        n = sum(flags) + extra
        if n == 0:
            return
        assert average_precision(np.array(flags), n) == pytest.approx(_ap_oracle(flags, n), abs=1e-12)

    def test_default_noise_short_scene_band(self, short_scene):
        from intersection_edge.scenesim.camera import Camera

        cam = Camera()
        truth = detemu.truth_boxes(short_scene, cam.world_to_crop(), cam.crop_dims)
        dets = detemu.emulate_scene(truth, DEFAULT_NOISE, 7)
        ap = evaluate_ap([d for f in dets for d in f], detemu.flatten_truth(truth))["ap"]
        # loose band; the 5-seed 10-minute protocol lives in the acceptance suite
        assert 0.5 < ap[PED] < 0.8 and 0.93 < ap[VEH] <= 1.0


class TestLatency:
    def test_constant(self):
        m = LatencyModel(20000, 0)
        assert {inference_latency(m, n) for n in (0, 5, 500)} == {20000}

    def test_linear(self):
        assert inference_latency(LatencyModel(20000, 50), 10) == 20500

    def test_calibrated_ratio(self):
        m = LatencyModel.calibrated()
        ratio = sweep_latency(m, 26000) / sweep_latency(m, 4000)
        assert ratio == pytest.approx(1.40, rel=0.02)
        assert ratio == pytest.approx(1.40, abs=1e-9)

    def test_calibrated_closed_form(self):
        m = LatencyModel.calibrated(28580, 0.4, 2700, 4000, 26000)
        assert m.per_object_us == pytest.approx(0.4 * 2700 * 28580 / (26000 - 1.4 * 4000))

    def test_invalid(self):
        with pytest.raises(ValueError):
            LatencyModel(0, 1)
        with pytest.raises(ValueError):
            inference_latency(LatencyModel(), -1)

    def test_sweep_distributes_remainder(self):
        m = LatencyModel(100, 1)
        assert sweep_latency(m, 7, frames=3) == 3 * 100 + 7


def test_log_round_trip(tmp_path):
    dets = emulate(_rows(12), DEFAULT_NOISE, 5, 9)
    write_detections(tmp_path / "d.log", dets)
    back = read_detections(tmp_path / "d.log")
    assert (tmp_path / "d.log").read_text().splitlines()[0] == "# frame_index,x_min,y_min,x_max,y_max,class,confidence"
    assert len(back) == len(dets)
    for a, b in zip(dets, back):
        assert a.frame_index == b.frame_index and a.cls == b.cls
        assert np.allclose(a.box, b.box, atol=5e-5) and math.isclose(a.confidence, b.confidence, abs_tol=5e-7)
