"""Acceptance suite: ten exit criteria, each run at its stated protocol and
tolerance and reported as one PASS/FAIL line.

``quick=True`` shortens the long scenarios for smoke runs; the verdicts
from a quick run are not the acceptance verdicts.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, TextIO

import numpy as np

from . import analytics, anonymize, detemu, evaluation, kernels
from .geometry import calibrate, pixel_rect
from .radar import MemorySink, budget_report
from .radar import wire
from .scenesim.camera import Camera, TruthRegion, sensitive_regions
from .scenesim.generate import SceneConfig, ScriptedObject, generate
from .tracker import TrackerConfig, evaluate_mota, kalman, run_tracker
from .tracker.assoc import solve_assignment
from .tracker.mota import mota_from_counts
from .types import ObjClass

BUDGET_US = 33333


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  [{self.number:2d}] {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _default_cfg():
    from .pipeline.config import bundled

    return bundled()


def _scene(duration: float, seed: int, cfg=None):
    cfg = cfg or _default_cfg()
    sc = SceneConfig(**{**cfg.scene.__dict__, "duration": duration, "seed": seed})
    return generate(sc)


def _truth(scene, cam: Camera):
    return detemu.truth_boxes(scene, cam.world_to_crop(), cam.crop_dims)


def _px_to_world(cam: Camera):
    return calibrate(cam.calibration_points())


# -- 1 -------------------------------------------------------------------------------


def latency_budget(quick: bool = False) -> tuple[bool, str]:
    """Five minutes of real-time replay with the calibrated latency model."""
    from .pipeline.realtime import replay

    cfg = _default_cfg()
    seconds = 30.0 if quick else cfg.radar.realtime_seconds
    cam = cfg.camera
    scene = _scene(seconds, cfg.seed, cfg)
    truth = _truth(scene, cam)
    peak = max((len(f) for f in truth), default=0)
    res = replay(truth, cfg.scene.frame_rate, cfg.noise, cfg.seed, cfg.latency.model(), cfg.tracker,
                 _px_to_world(cam), MemorySink(), cam.crop_dims, None, cfg.analytics.threshold_m,
                 cfg.radar.intersection_id, cfg.radar.mtu, cfg.radar.queue_depth)
    if res.error is not None:
        return False, f"replay failed: {res.error!r}"
    rep = budget_report(res.traces, BUDGET_US)
    p50, p99 = rep.end_to_end
    det = rep.stages.get("detect", (float("nan"), float("nan")))
    ok = p99 < BUDGET_US and peak <= 50
    return ok, (f"p99 {p99:.0f} us (p50 {p50:.0f}, detect p99 {det[1]:.0f}) vs {BUDGET_US} us; "
                f"{res.completed}/{res.frames_in} frames broadcast, peak {peak} objects/frame, "
                f"k={cfg.latency.model().per_object_us:.1f} us/object")


# -- 2 -------------------------------------------------------------------------------


def motion_granularity(quick: bool = False) -> tuple[bool, str]:
    """A lone 10 km/h vehicle driving straight through; per-frame displacement."""
    speed = 10.0 / 3.6
    cfg = SceneConfig(duration=12.0, seed=0, spawn_rates={"vehicle": 0.0, "pedestrian": 0.0, "bicycle": 0.0},
                      warmup=0.0, scripted=(ScriptedObject(ObjClass.VEHICLE, speed, 0.0, "S", "N"),))
    scene = generate(cfg)
    pos = np.array([f.pos[0] for f in scene if len(f)])
    step = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    expect = speed / cfg.frame_rate
    err = float(np.max(np.abs(step - expect))) if len(step) else math.inf
    return err <= 1e-6 and len(step) > 30, f"{len(step)} steps, mean {step.mean():.7f} m, expected {expect:.7f} m, max |err| {err:.2e}"


# -- 3 -------------------------------------------------------------------------------


def density_scaling(quick: bool = False) -> tuple[bool, str]:
    m = _default_cfg().latency
    model = m.model()
    lo = detemu.sweep_latency(model, m.sweep_low, m.sweep_frames)
    hi = detemu.sweep_latency(model, m.sweep_high, m.sweep_frames)
    ratio = hi / lo
    return abs(ratio - 1.40) <= 0.02 * 1.40, f"ratio {ratio:.4f} ({hi / 1e6:.2f} s vs {lo / 1e6:.2f} s)"


# -- 4 -------------------------------------------------------------------------------


def detector_band(quick: bool = False) -> tuple[bool, str]:
    """Default noise on the standard 10-minute scene, five seeds."""
    cfg = _default_cfg()
    seeds = range(5)
    duration = 120.0 if quick else 600.0
    cam = cfg.camera
    rows, ok = [], True
    for s in seeds:
        truth = _truth(_scene(duration, s, cfg), cam)
        dets = detemu.emulate_scene(truth, cfg.noise, s, cam.crop_dims)
        ap = detemu.evaluate_ap([d for f in dets for d in f], detemu.flatten_truth(truth))["ap"]
        p, v = ap[ObjClass.PEDESTRIAN], ap[ObjClass.VEHICLE]
        ok &= 0.60 <= p <= 0.72 and 0.95 <= v <= 0.99
        rows.append(f"seed {s}: ped {p:.4f} veh {v:.4f}")
    return ok, "; ".join(rows)


# -- 5 -------------------------------------------------------------------------------


def tracking(quick: bool = False) -> tuple[bool, str]:
    cfg = _default_cfg()
    cam = cfg.camera
    truth = _truth(_scene(120.0 if quick else 300.0, cfg.seed, cfg), cam)
    h = _px_to_world(cam)
    out = {}
    for name, prof in (("clean", detemu.ZERO_NOISE), ("noisy", cfg.noise)):
        dets = detemu.emulate_scene(truth, prof, cfg.seed, cam.crop_dims)
        tracks, _ = run_tracker(dets, cfg.tracker, h, cfg.scene.frame_rate)
        out[name] = {c: r.mota for c, r in evaluate_mota(tracks, truth).items()}
    clean_ok = all(v >= 0.95 for v in out["clean"].values())
    vm, pm = out["noisy"][ObjClass.VEHICLE], out["noisy"][ObjClass.PEDESTRIAN]
    ok = clean_ok and 0.70 <= vm <= 0.85 and vm > pm
    clean = ", ".join(f"{c.label} {v:.4f}" for c, v in out["clean"].items())
    return ok, f"clean [{clean}]; noisy vehicle {vm:.4f}, pedestrian {pm:.4f}"


# -- 6 -------------------------------------------------------------------------------


def counting(quick: bool = False) -> tuple[bool, str]:
    cfg = _default_cfg()
    cam = cfg.camera
    scene = _scene(180.0 if quick else 1260.0, cfg.seed, cfg)
    truth = _truth(scene, cam)
    dets = detemu.emulate_scene(truth, cfg.noise, cfg.seed, cam.crop_dims)
    tracks, _ = run_tracker(dets, cfg.tracker, _px_to_world(cam), cfg.scene.frame_rate)
    veh = analytics.track_table(tracks, ObjClass.VEHICLE)
    pred = analytics.count_turns([sorted((f, v[0]) for f, v in hist.items()) for _, hist in sorted(veh.items())])
    tt = evaluation.truth_turn_counts(scene)
    acc = analytics.counting_accuracy(pred, tt)
    return acc >= 0.95, f"accuracy {acc:.4f} ({pred.total()} counted, {tt.total()} true movements)"


# -- 7 -------------------------------------------------------------------------------


def distancing(quick: bool = False) -> tuple[bool, str]:
    """Pair-frame violation F1 on clean tracks of a scene with labelled walking groups."""
    cfg = _default_cfg()
    cam = cfg.camera
    a = cfg.analytics
    scene = _scene(120.0 if quick else 300.0, cfg.seed, cfg)
    n_groups = len({int(g) for f in scene for g in f.group if g})
    truth = _truth(scene, cam)
    dets = detemu.emulate_scene(truth, detemu.ZERO_NOISE, cfg.seed, cam.crop_dims)
    tracks, _ = run_tracker(dets, cfg.tracker, _px_to_world(cam), cfg.scene.frame_rate)
    s = evaluation.score_distancing(scene, tracks, truth, a.threshold_m, a.window, a.d_group, a.sigma_max,
                                    a.cos_min, a.max_gap)
    ok = n_groups > 0 and s.validated[2] >= 0.90 and s.validated[2] > s.raw[2]
    return ok, (f"F1 validated {s.validated[2]:.4f} vs raw {s.raw[2]:.4f}; {n_groups} groups, "
                f"{s.n_truth} true pair-frames, {s.n_raw} raw flags, {s.n_kept} kept")


# -- 8 -------------------------------------------------------------------------------


def _oracle_stats(blur, regions, dims, floor, cmin: Fraction):
    stats = {k: anonymize.RecallStats(k) for k in anonymize.KINDS}
    for t in regions:
        st = stats[t.kind]
        st.total += 1
        x0, y0, x1, y1 = t.box
        area = (x1 - x0) * (y1 - y0)
        cov = anonymize.coverage_oracle(blur, t.box, *dims)
        hit = area > 0 and Fraction(cov, area) >= cmin
        if area >= floor:
            st.eligible += 1
            st.anonymized += hit
        if t.identifiable:
            st.visible += 1
            st.visible_anonymized += hit
    return stats


def anonymization(quick: bool = False) -> tuple[bool, str]:
    cfg = _default_cfg()
    cam = cfg.camera
    dims = cam.crop_dims
    an = cfg.anonymize
    scene = _scene(120.0, cfg.seed, cfg)
    h = cam.world_to_crop()
    rng = np.random.default_rng(cfg.seed)
    picks = sorted(rng.choice(len(scene), size=min(100, len(scene)), replace=False).tolist())
    mismatch = regions_seen = 0
    total = {k: anonymize.RecallStats(k) for k in anonymize.KINDS}
    for f in picks:
        fr = scene[f]
        rows = detemu.truth_boxes([fr], h, dims)[0]
        dets = detemu.emulate(rows, cfg.noise, cfg.seed, f, dims)
        blur = anonymize.blur_boxes_for_detections(dets, *dims)
        regions = sensitive_regions(fr, h, dims, an.identifiable_area_px)
        regions_seen += len(regions)
        got = anonymize.evaluate_recall(blur, regions, an.area_floor_px, an.coverage_min)
        want = _oracle_stats(blur, regions, dims, an.area_floor_px, Fraction(3, 4))
        rects = np.array([pixel_rect(b) for b in blur], dtype=np.int64).reshape(-1, 4)
        for t in regions:
            if (kernels.union_coverage(t.box, rects) if len(rects) else 0) != anonymize.coverage_oracle(blur, t.box, *dims):
                mismatch += 1
        for k in anonymize.KINDS:
            if got[k].__dict__ != want[k].__dict__:
                mismatch += 1
            total[k].merge(got[k])

    # floor and coverage boundaries, exact
    edge = [
        # (region box, blurred rects, eligible, anonymized)
        ((0, 0, 10, 10), [(0, 0, 10, 10)], True, True),  # 100 px, floor is inclusive
        ((0, 0, 11, 9), [(0, 0, 11, 9)], False, True),  # 99 px, below floor
        ((0, 0, 20, 10), [(0, 0, 15, 10)], True, True),  # exactly 3/4 covered
        ((0, 0, 20, 10), [(0, 0, 14, 10), (14, 0, 15, 9)], True, False),  # 149/200 < 3/4
        ((0, 0, 20, 20), [(0, 0, 20, 10), (0, 5, 10, 20)], True, True),  # overlap counted once: 350/400
        ((0, 0, 20, 20), [(0, 0, 20, 10), (0, 5, 10, 19)], True, False),  # 290/400
    ]
    edge_bad = 0
    for box, rects, elig, anon in edge:
        st = anonymize.evaluate_recall(rects, [TruthRegion(0, "face", box, True)], an.area_floor_px,
                                       an.coverage_min)["face"]
        if (st.eligible == 1) != elig or (st.visible_anonymized == 1) != anon:
            edge_bad += 1
    tr = {k: f"{s.total_recall:.4f}" for k, s in total.items()}
    return mismatch == 0 and edge_bad == 0 and regions_seen > 0, (
        f"{len(picks)} frames, {regions_seen} regions, {mismatch} oracle mismatches, "
        f"{edge_bad}/{len(edge)} boundary failures; total recall {tr}")


# -- 9 -------------------------------------------------------------------------------


def _random_message(rng: np.random.Generator) -> wire.RadarMessage:
    n = int(rng.integers(0, 60)) if rng.random() < 0.95 else int(rng.integers(60, wire.max_objects_for_mtu(9000) + 1))
    i32 = (-(2**31), 2**31)
    objs = tuple(
        wire.RadarObject(int(rng.integers(0, 2**32)), ObjClass(int(rng.integers(0, int(ObjClass.OTHER) + 1))),
                         *(int(v) for v in rng.integers(*i32, size=4)))
        for _ in range(n)
    )
    return wire.RadarMessage(int(rng.integers(0, 2**32)), int(rng.integers(0, 2**63)) * 2 + int(rng.integers(0, 2)),
                             int(rng.integers(0, 2**63)) * 2 + int(rng.integers(0, 2)), objs)


def wire_protocol(quick: bool = False) -> tuple[bool, str]:
    rng = np.random.default_rng(12120)
    n = 10_000
    bad_rt = bad_len = accepted_corrupt = corrupt = 0
    for _ in range(n):
        msg = _random_message(rng)
        data = wire.encode(msg)
        if (len(data) - wire.HEADER_SIZE) % wire.OBJECT_SIZE or len(data) != wire.datagram_size(len(msg.objects)):
            bad_len += 1
        if wire.decode(data) != msg:
            bad_rt += 1
        cut = int(rng.integers(0, len(data)))
        bad_magic = bytes([data[0] ^ (1 + int(rng.integers(0, 255)))]) + data[1:]
        bad_ver = data[:4] + bytes([int(rng.choice([v for v in range(256) if v != wire.VERSION]))]) + data[5:]
        extra = data + bytes(int(rng.integers(1, 24)))
        for blob, err in ((data[:cut], wire.TruncatedMessage), (bad_magic, wire.BadMagic),
                          (bad_ver, wire.UnsupportedVersion), (extra, wire.TruncatedMessage)):
            corrupt += 1
            try:
                wire.decode(blob)
            except err:
                continue
            except wire.WireError:
                pass
            accepted_corrupt += 1
    # every truncation length of one full-size datagram
    full = wire.encode(_random_message(np.random.default_rng(1)))
    for k in range(len(full)):
        corrupt += 1
        try:
            wire.decode(full[:k])
            accepted_corrupt += 1
        except wire.TruncatedMessage:
            pass
    ok = bad_rt == 0 and bad_len == 0 and accepted_corrupt == 0
    return ok, f"{n} round-trips, {bad_rt} mismatches, {bad_len} bad lengths; {corrupt} corruptions, {accepted_corrupt} mis-handled"


# -- 10 ------------------------------------------------------------------------------


def _brute_assignment(cost: np.ndarray, allowed: np.ndarray) -> tuple[int, float]:
    """Best (cardinality, -cost) over all partial matchings, by DP on the used-column set."""
    n, m = cost.shape
    best = {0: (0, 0.0)}
    for i in range(n):
        nxt = dict(best)
        for mask, (cnt, c) in best.items():
            for j in range(m):
                if allowed[i, j] and not mask >> j & 1:
                    key, val = mask | 1 << j, (cnt + 1, c + cost[i, j])
                    cur = nxt.get(key)
                    if cur is None or val[0] > cur[0] or (val[0] == cur[0] and val[1] < cur[1]):
                        nxt[key] = val
        best = nxt
    return max(best.values(), key=lambda v: (v[0], -v[1]))


def _hungarian_oracle(rng) -> int:
    bad = 0
    for _ in range(1000):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        if rng.random() < 0.3:
            cost = rng.integers(0, 4, size=(n, m)).astype(float) / 4.0  # many ties
        else:
            cost = rng.random((n, m))
        allowed = rng.random((n, m)) < rng.uniform(0.3, 1.0)
        got = solve_assignment(cost, allowed)
        rows, cols = [r for r, _ in got], [c for _, c in got]
        valid = len(set(rows)) == len(rows) and len(set(cols)) == len(cols) and all(allowed[r, c] for r, c in got)
        cnt, c = _brute_assignment(cost, allowed)
        if not valid or len(got) != cnt or abs(sum(cost[r, k] for r, k in got) - c) > 1e-9:
            bad += 1
    return bad


def _kalman_oracle(rng) -> tuple[float, int]:
    worst = 0.0
    bad = 0
    for _ in range(200):
        x0, y0 = rng.uniform(0, 800, 2)
        w, h = rng.uniform(8, 80, 2)
        st = kalman.initiate((x0, y0, x0 + w, y0 + h))
        st = kalman.update(kalman.predict(st), (x0 + 1, y0 + 0.5, x0 + w + 1, y0 + h + 0.5))
        st = kalman.KalmanState(st.mean + np.r_[0, 0, 0, 0, rng.normal(0, 1, 3)], st.cov, st.ref)
        for dt in (2, 3):
            direct = kalman.predict(st, dt)
            stepped = st
            for _ in range(dt):
                stepped = kalman.predict(stepped, 1)
            scale = max(1.0, float(np.abs(direct.cov).max()))
            err = max(float(np.abs(direct.mean - stepped.mean).max()), float(np.abs(direct.cov - stepped.cov).max()) / scale)
            worst = max(worst, err)
            bad += err > 1e-9
    # scalar worked example: prior (0, 4) fused with measurement (2, 4) -> (1, 2)
    out = kernels.kf_update(np.array([0.0]), np.array([[4.0]]), np.array([2.0]), np.eye(1), np.array([[4.0]]))
    if out is None or abs(out[0][0] - 1.0) > 1e-12 or abs(out[1][0, 0] - 2.0) > 1e-12:
        bad += 1
    return worst, bad


def _homography_oracle(rng) -> tuple[float, int]:
    worst, bad = 0.0, 0
    for _ in range(200):
        m = np.eye(3) + rng.normal(0, 0.2, (3, 3))
        m[2, :2] = rng.normal(0, 1e-3, 2)
        m[:2, 2] = rng.uniform(-200, 200, 2)
        src = rng.uniform(0, 800, (int(rng.integers(4, 12)), 2))
        hom = np.c_[src, np.ones(len(src))] @ m.T
        if np.any(np.abs(hom[:, 2]) < 1e-3):
            continue
        dst = hom[:, :2] / hom[:, 2:]
        try:
            H = calibrate(list(zip(map(tuple, src), map(tuple, dst))))
        except Exception:
            bad += 1
            continue
        probe = rng.uniform(0, 800, (50, 2))
        there = H.apply_many(probe)
        back = H.inverse().apply_many(there)
        err = float(np.abs(back - probe).max())
        fit = float(np.abs(H.apply_many(src) - dst).max())
        worst = max(worst, err, fit)
        bad += err > 1e-6 or fit > 1e-6
    return worst, bad


def _mota_oracle() -> int:
    bad = 0
    # formula instances
    for gt, fn, fp, idsw, want in ((100, 10, 5, 2, Fraction(83, 100)), (10, 0, 0, 0, Fraction(1)),
                                   (4, 4, 4, 0, Fraction(-1)), (7, 1, 2, 1, Fraction(3, 7))):
        if abs(mota_from_counts(gt, fn, fp, idsw) - float(want)) > 1e-15:  # one ulp of rounding
            bad += 1
    # one truth object, one identity switch and one gap
    box = (0.0, 0.0, 10.0, 10.0)
    c = int(ObjClass.VEHICLE)
    truth = [[(1, box, c)]] * 4
    hyp = [[(7, box, c)], [(7, box, c)], [], [(8, box, c)]]
    r = evaluate_mota(hyp, truth)[ObjClass.VEHICLE]
    bad += (r.gt, r.fn, r.fp, r.idsw) != (4, 1, 0, 1) or r.mota != 0.5
    # a false positive alongside a persistent match
    hyp = [[(7, box, c), (9, (50.0, 50.0, 60.0, 60.0), c)]] + [[(7, box, c)]] * 3
    r = evaluate_mota(hyp, truth)[ObjClass.VEHICLE]
    bad += (r.fn, r.fp, r.idsw) != (0, 1, 0) or r.mota != 0.75
    return bad


def oracle_suites(quick: bool = False) -> tuple[bool, str]:
    rng = np.random.default_rng(20210601)
    hb = _hungarian_oracle(rng)
    kw, kb = _kalman_oracle(rng)
    hw, hbad = _homography_oracle(rng)
    mb = _mota_oracle()
    ok = hb == 0 and kb == 0 and hbad == 0 and mb == 0
    return ok, (f"hungarian {hb}/1000 mismatches; kalman worst {kw:.1e} ({kb} bad); "
                f"homography worst {hw:.1e} ({hbad} bad); mota {mb} bad")


CRITERIA: dict[int, tuple[str, Callable[[bool], tuple[bool, str]]]] = {
    1: ("latency budget p99 < 33333 us", latency_budget),
    2: ("10 km/h moves 0.0926 m/frame", motion_granularity),
    3: ("density-load sweep ratio 1.40 +/- 2%", density_scaling),
    4: ("detector AP bands over 5 seeds", detector_band),
    5: ("tracking MOTA clean and noisy", tracking),
    6: ("turn counting accuracy >= 95%", counting),
    7: ("distancing F1 >= 0.90 with group validation", distancing),
    8: ("anonymization recall vs per-pixel oracle", anonymization),
    9: ("wire protocol round-trip and rejection", wire_protocol),
    10: ("oracle suites", oracle_suites),
}


def run_one(number: int, quick: bool = False) -> CriterionResult:
    name, fn = CRITERIA[number]
    t = time.perf_counter()
    try:
        ok, detail = fn(quick)
    except Exception as e:  # a crash is a failure, reported like one
        ok, detail = False, f"error {type(e).__name__}: {e}"
    return CriterionResult(number, name, bool(ok), detail, time.perf_counter() - t)


def run_criteria(only=None, quick: bool = False, out: TextIO | None = sys.stdout) -> list[CriterionResult]:
    results = []
    for n in sorted(only or CRITERIA):
        if n not in CRITERIA:
            raise ValueError(f"no criterion {n}")
        r = run_one(n, quick)
        results.append(r)
        if out is not None:
            print(r.line(), file=out, flush=True)
    return results
