import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from intersection_edge.detemu import EmptyTruth, Detection
from intersection_edge.tracker import (
    OutOfOrderFrame,
    Tracker,
    TrackerConfig,
    evaluate_mota,
    kalman,
    read_tracks,
    run_tracker,
    write_tracks,
)
from intersection_edge.tracker.assoc import associate, solve_assignment
from intersection_edge.tracker.mota import mota_from_counts
from intersection_edge.types import ObjClass

VEH, PED = ObjClass.VEHICLE, ObjClass.PEDESTRIAN


def _box(u, v, w=40.0, h=20.0):
    return (u - w / 2, v - h / 2, u + w / 2, v + h / 2)


def _moving(n, u0=100.0, du=3.0, cls=VEH, conf=0.9, v=200.0):
    return [[Detection(f, _box(u0 + du * f, v), cls, conf)] for f in range(n)]


class TestKalman:
    def test_predict_zero_velocity(self):
        st0 = kalman.initiate(_box(100, 100))
        p = kalman.predict(st0)
        assert np.allclose(p.mean, st0.mean)
        F, Q = kalman.transition(1), kalman.process_noise(st0.ref)
        assert np.allclose(p.cov, F @ st0.cov @ F.T + Q)
        assert np.all(np.diag(p.cov) >= np.diag(st0.cov) + np.diag(Q) - 1e-12)

    def test_predict_velocity(self):
        st0 = kalman.initiate(_box(100, 100))
        st0 = kalman.KalmanState(st0.mean + np.r_[0, 0, 0, 0, 3.0, 0, 0], st0.cov, st0.ref)
        assert kalman.predict(st0).mean[0] == pytest.approx(103.0)

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-20, 20), st.integers(2, 5))
    def test_multi_step_composes(self, du, dv, ds, dt):
        st0 = kalman.initiate(_box(300, 200, 50, 30))
        st0 = kalman.KalmanState(st0.mean + np.r_[0, 0, 0, 0, du, dv, ds], st0.cov, st0.ref)
        direct = kalman.predict(st0, dt)
        stepped = st0
        for _ in range(dt):
            stepped = kalman.predict(stepped)
        assert np.allclose(direct.mean, stepped.mean, atol=1e-9, rtol=0)
        assert np.allclose(direct.cov, stepped.cov, atol=1e-9 * max(1.0, np.abs(direct.cov).max()), rtol=0)

    def test_update_contracts(self):
        p = kalman.predict(kalman.initiate(_box(100, 100)))
        R = np.eye(4) * 1e-6
        target = _box(101, 100.5)
        u = kalman.update(p, target, R)
        assert abs(u.mean[0] - 101) < abs(p.mean[0] - 101)
        assert np.trace(u.cov) < np.trace(p.cov)

    def test_uninformative_measurement(self):
        p = kalman.predict(kalman.initiate(_box(100, 100)))
        R = kalman.measurement_noise(p.ref) * 1e12
        u = kalman.update(p, _box(180, 130), R)
        assert np.allclose(u.mean, p.mean, atol=1e-6)

    def test_scalar_analog(self):
        from intersection_edge import kernels

        m, c = kernels.kf_update(np.zeros(1), np.array([[4.0]]), np.array([2.0]), np.eye(1), np.array([[4.0]]))
        assert m[0] == pytest.approx(1.0) and c[0, 0] == pytest.approx(2.0)

    def test_singular(self):
        p = kalman.initiate(_box(100, 100))
        p = kalman.KalmanState(p.mean, np.zeros((7, 7)), p.ref)
        with pytest.raises(kalman.SingularInnovation):
            kalman.update(p, _box(100, 100), np.zeros((4, 4)))

    def test_box_round_trip(self):
        b = (10.0, 20.0, 50.0, 35.0)
        assert kalman.state_to_box(kalman.box_to_z(b)) == pytest.approx(b)


def _brute(cost, allowed):
    n, m = cost.shape
    best = (0, 0.0)
    for k in range(min(n, m), 0, -1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                if all(allowed[r, c] for r, c in zip(rows, cols)):
                    c = sum(cost[r, cc] for r, cc in zip(rows, cols))
                    if best[0] < k or c < best[1]:
                        best = (k, c)
        if best[0] == k:
            return best
    return best


class TestAssociation:
    def test_diagonal(self):
        cost = np.array([[0.0, 0.9], [0.9, 0.0]])
        assert solve_assignment(cost, cost < 1) == [(0, 0), (1, 1)]

    def test_no_detections(self):
        assert associate(np.array([_box(1, 1), _box(9, 9)]), [1, 1], np.zeros((0, 4)), []) == ([], [0, 1], [])

    def test_class_gate(self):
        m, ut, ud = associate(np.array([_box(100, 100)]), [int(VEH)], np.array([_box(100, 100)]), [int(PED)])
        assert m == [] and ut == [0] and ud == [0]

    def test_iou_gate(self):
        m, _, _ = associate(np.array([_box(100, 100)]), [1], np.array([_box(135, 100)]), [1], iou_threshold=0.3)
        assert m == []

    def test_random_4x4_vs_permutations(self, rng):
        for _ in range(50):
            cost = rng.random((4, 4))
            got = solve_assignment(cost, np.ones((4, 4), bool))
            best = min(sum(cost[i, p[i]] for i in range(4)) for p in itertools.permutations(range(4)))
            assert sum(cost[r, c] for r, c in got) == pytest.approx(best, abs=1e-12)

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_partial_vs_brute(self, n, m, seed):
        r = np.random.default_rng(seed)
        cost = r.integers(0, 3, (n, m)) / 2.0
        allowed = r.random((n, m)) < 0.6
        got = solve_assignment(cost, allowed)
        k, c = _brute(cost, allowed)
        assert len(got) == k
        assert sum(cost[a, b] for a, b in got) == pytest.approx(c, abs=1e-12)
        assert all(allowed[a, b] for a, b in got)

    def test_ties_are_canonical(self):
        cost = np.zeros((3, 3))
        assert solve_assignment(cost, np.ones((3, 3), bool)) == [(0, 0), (1, 1), (2, 2)]

    def test_appearance_breaks_overlap_tie(self):
        tboxes = np.array([_box(100, 100), _box(104, 100)])
        dboxes = np.array([_box(102, 100), _box(102, 100)])
        sim = lambda a, b: 1.0 if a == b else 0.0
        m, _, _ = associate(tboxes, [1, 1], dboxes, [1, 1], 0.3, sim, 0.5, ["a", "b"], ["b", "a"])
        assert sorted(m) == [(0, 1), (1, 0)]


class TestTracker:
    def test_single_object_lifecycle(self):
        out, tr = run_tracker(_moving(10))
        ids = {s.track_id for f in out for s in f}
        assert ids == {1}
        assert [len(f) for f in out] == [0, 0, 1, 1, 1, 1, 1, 1, 1, 1]

    def test_gap_kills_track(self):
        cfg = TrackerConfig(max_age=3)
        frames = _moving(8) + [[] for _ in range(4)] + [[Detection(12 + f, _box(136 + 3 * f, 200), VEH, 0.9)] for f in range(5)]
        out, _ = run_tracker(frames, cfg)
        assert {s.track_id for f in out[:8] for s in f} == {1}
        assert {s.track_id for f in out[12:] for s in f} == {2}

    def test_short_gap_survives(self):
        frames = _moving(8)
        frames[5] = []
        out, _ = run_tracker(frames, TrackerConfig(min_hits=1))
        assert {s.track_id for f in out for s in f} == {1}

    def test_low_confidence_ignored(self):
        out, tr = run_tracker(_moving(10, conf=0.3))
        assert all(not f for f in out) and tr.all_tracks() == []

    def test_out_of_order(self):
        tr = Tracker()
        tr.step(5, [])
        with pytest.raises(OutOfOrderFrame):
            tr.step(5, [])

    def test_frame_skip_predicts_ahead(self):
        tr = Tracker(TrackerConfig(min_hits=1))
        for f in range(5):
            tr.step(f, _moving(5)[f])
        snaps = tr.step(8, [Detection(8, _box(124, 200), VEH, 0.9)])
        assert [s.track_id for s in snaps] == [1]

    def test_world_velocity(self):
        from intersection_edge.geometry import Homography

        h = Homography.scaling(0.05)  # 20 px per metre
        out, _ = run_tracker(_moving(40, du=3.0), TrackerConfig(), h, 30.0)
        vx, vy = out[-1][0].world_vel
        assert vx == pytest.approx(3.0 * 0.05 * 30, rel=0.05) and abs(vy) < 0.1

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            TrackerConfig(min_hits=0)
        with pytest.raises(ValueError):
            TrackerConfig(iou_threshold=1.5)

    def test_log_round_trip(self, tmp_path):
        out, _ = run_tracker(_moving(20, du=2.0))
        write_tracks(tmp_path / "t.log", out)
        back = read_tracks(tmp_path / "t.log", 20)
        assert (tmp_path / "t.log").read_text().startswith("# frame_index,track_id,class,u,v,s,r,world_x,world_y\n")
        for a, b in zip(out, back):
            assert [s.track_id for s in a] == [s.track_id for s in b]
            for x, y in zip(a, b):
                assert np.allclose(x.box, y.box, atol=1e-2)
        # velocity rebuilt from consecutive logged positions
        assert back[10][0].world_vel[0] == pytest.approx(2.0 * 30, rel=0.05)


class TestMota:
    def _truth(self, n=4):
        return [[(1, (0.0, 0.0, 10.0, 10.0), int(VEH))] for _ in range(n)]

    def test_perfect(self):
        r = evaluate_mota(self._truth(), self._truth())[VEH]
        assert (r.mota, r.fn, r.fp, r.idsw) == (1.0, 0, 0, 0)

    def test_formula_instance(self):
        assert mota_from_counts(10, 1, 1, 0) == pytest.approx(0.8)
        with pytest.raises(EmptyTruth):
            mota_from_counts(0, 0, 0, 0)

    def test_identity_switch(self):
        hyp = [[(7, (0, 0, 10, 10), int(VEH))]] * 2 + [[(8, (0, 0, 10, 10), int(VEH))]] * 2
        r = evaluate_mota(hyp, self._truth())[VEH]
        assert (r.fn, r.fp, r.idsw) == (0, 0, 1) and r.mota == 0.75

    def test_match_kept_over_better_iou(self):
        t = [[(1, (0, 0, 10, 10), 1)]] * 2
        hyp = [[(7, (0, 0, 10, 10), 1)], [(7, (0, 0, 10, 7), 1), (8, (0, 0, 10, 10), 1)]]
        r = evaluate_mota(hyp, t)[VEH]
        assert (r.idsw, r.fp) == (0, 1)

    def test_per_class_and_empty(self):
        t = [[(1, (0, 0, 10, 10), int(VEH)), (2, (50, 50, 60, 60), int(PED))]]
        r = evaluate_mota([[]], t)
        assert r[VEH].mota == 0.0 and r[PED].fn == 1
        with pytest.raises(EmptyTruth):
            evaluate_mota([[]], [[]])

    def test_clean_short_scene(self, short_scene):
        from intersection_edge import detemu
        from intersection_edge.scenesim.camera import Camera

        cam = Camera()
        truth = detemu.truth_boxes(short_scene, cam.world_to_crop())
        out, _ = run_tracker(detemu.emulate_scene(truth, detemu.ZERO_NOISE, 0))
        res = evaluate_mota(out, truth)
        assert all(r.mota >= 0.95 for r in res.values())
