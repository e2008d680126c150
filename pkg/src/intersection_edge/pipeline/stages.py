"""Pipeline stages. Each reads its inputs from memory when chained by
:func:`run` or from the previous stage's logs when invoked on its own."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__, analytics, anonymize, detemu, evaluation
from ..geometry import SceneMask, apply_mask, calibrate, load_correspondences, load_mask
from ..radar import FileSink, MemorySink, UdpSink, budget_report
from ..radar.budget import write_budget_csv, write_traces_csv
from ..scenesim.camera import project_frame, sensitive_regions
from ..scenesim.generate import IncompleteRoute, Scene, generate as generate_scene, truth_turn_label
from ..scenesim.io import read_ground_truth, write_ground_truth
from ..tracker import Tracker, evaluate_mota, read_tracks, write_tracks
from ..types import ObjClass
from .config import RunConfig
from .realtime import replay

GT_LOG = "ground_truth.log"
ROUTES_CSV = "routes.csv"
DET_LOG = "detections.log"
TRACK_LOG = "tracks.log"
TURNS_CSV = "turn_counts.csv"
TRUTH_TURNS_CSV = "turn_counts_truth.csv"
EVENTS_CSV = "violations.csv"
HIST_CSV = "violation_histogram.csv"
F1_CSV = "distancing_f1.csv"
AP_CSV = "detection_ap.csv"
MOTA_CSV = "mota.csv"
COUNT_CSV = "counting.csv"
AUDIT_CSV = "anonymization_audit.csv"
TRACES_CSV = "latency_traces.csv"
BUDGET_CSV = "latency_budget.csv"
CAPTURE = "radar_capture.bin"
MANIFEST = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, err: BaseException):
        super().__init__(f"[{stage}] {type(err).__name__}: {err}")
        self.stage = stage
        self.err = err


class MissingLog(FileNotFoundError):
    pass


def need(out: Path, name: str) -> Path:
    p = out / name
    if not p.exists():
        raise MissingLog(f"{p} is missing; run the stage that produces it first")
    return p


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    scene: Scene | None = None
    frames: list | None = None  # FrameTruth per frame
    routes: dict | None = None  # id -> (class, entry, exit, label)
    truth: list | None = None  # per-frame [(id, box, class)] in crop pixels
    detections: list | None = None
    snapshots: list | None = None
    tracker: Tracker | None = None
    metrics: dict = field(default_factory=dict)
    replay_result: object = None

    @property
    def dims(self) -> tuple[int, int]:
        return self.cfg.camera.crop_dims

    def mask(self) -> SceneMask:
        if self.cfg.mask_path:
            m = load_mask(self.cfg.mask_path)
            if (m.width, m.height) != self.dims:
                raise ValueError(f"mask is {m.width}x{m.height}, crop is {self.dims}")
            return m
        return SceneMask.full(*self.dims)

    def px_to_world(self):
        """Pixel -> world map from surveyed correspondences (file or the camera's markers)."""
        if self.cfg.calibration_path:
            pairs = load_correspondences(self.cfg.calibration_path)
        else:
            pairs = self.cfg.camera.calibration_points()
        return calibrate(pairs)

    def world_to_px(self):
        return self.cfg.camera.world_to_crop()

    def ensure_frames(self):
        if self.frames is None:
            cfg = self.cfg.scene
            self.frames = read_ground_truth(need(self.out, GT_LOG), cfg.n_frames, cfg.frame_period_us)
        return self.frames

    def ensure_truth(self):
        if self.truth is None:
            h = self.world_to_px()
            self.truth = []
            for fr in self.ensure_frames():
                ids, boxes, cls = project_frame(fr, h, self.dims)
                self.truth.append([(int(i), tuple(float(v) for v in b), int(c)) for i, b, c in zip(ids, boxes, cls)])
        return self.truth

    def ensure_routes(self):
        if self.routes is None:
            self.routes = {}
            with open(need(self.out, ROUTES_CSV)) as fh:
                for row in csv.DictReader(fh):
                    self.routes[int(row["id"])] = (ObjClass.parse(row["class"]), row["entry"], row["exit"], row["movement"])
        return self.routes

    def ensure_detections(self):
        if self.detections is None:
            n = self.cfg.scene.n_frames
            per = [[] for _ in range(n)]
            for d in detemu.read_detections(need(self.out, DET_LOG)):
                per[d.frame_index].append(d)
            self.detections = per
        return self.detections

    def ensure_snapshots(self):
        if self.snapshots is None:
            self.snapshots = read_tracks(need(self.out, TRACK_LOG), self.cfg.scene.n_frames, self.cfg.scene.frame_rate)
        return self.snapshots


# -- stages ---------------------------------------------------------------------------


def stage_generate(ctx: Context) -> None:
    scene = generate_scene(ctx.cfg.scene)
    ctx.scene, ctx.frames = scene, scene.frames
    write_ground_truth(ctx.out / GT_LOG, scene.frames)
    ctx.routes = {}
    with open(ctx.out / ROUTES_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "class", "entry", "exit", "first_frame", "last_frame", "movement"])
        for rid in sorted(scene.routes):
            info = scene.routes[rid]
            if info.first_frame < 0:
                continue
            try:
                mv = truth_turn_label(info)
            except IncompleteRoute:
                mv = analytics.INCOMPLETE
            ctx.routes[rid] = (info.cls, info.entry or "", info.exit or "", mv)
            w.writerow([rid, info.cls.label, info.entry or "", info.exit or "", info.first_frame, info.last_frame, mv])
    ctx.metrics["scene"] = {"frames": len(scene), "object_frames": scene.object_frames(), "objects": len(ctx.routes)}
    # downstream stages work from the log, as they would when run on their own
    ctx.scene = ctx.frames = None


def stage_detect(ctx: Context) -> None:
    truth = ctx.ensure_truth()
    mask = ctx.mask() if ctx.cfg.mask_path else None
    out = []
    for f, rows in enumerate(truth):
        dets = detemu.emulate(rows, ctx.cfg.noise, ctx.cfg.seed, f, ctx.dims, mask)
        out.append(dets if mask is None else [d for d in dets if apply_mask(mask, d.box)])
    detemu.write_detections(ctx.out / DET_LOG, (d for f in out for d in f))
    ctx.detections = None
    ctx.metrics["detect"] = {"detections": sum(len(f) for f in out)}


def stage_track(ctx: Context) -> None:
    dets = ctx.ensure_detections()
    tr = Tracker(ctx.cfg.tracker, ctx.px_to_world(), ctx.cfg.scene.frame_rate)
    snaps = [tr.step(f, d) for f, d in enumerate(dets)]
    ctx.tracker = tr
    write_tracks(ctx.out / TRACK_LOG, snaps)
    # later stages read the log back so chained and stage-by-stage runs see identical tracks
    ctx.snapshots = None
    ctx.metrics["track"] = {"tracks": len(tr.all_tracks()), "emitted": len({s.track_id for f in snaps for s in f})}


def _truth_turns(routes: dict) -> analytics.TurnCount:
    tc = analytics.TurnCount()
    for cls, entry, _, mv in routes.values():
        if cls == ObjClass.VEHICLE and mv != analytics.INCOMPLETE:
            tc.add(entry, mv)
    return tc


def stage_analyze(ctx: Context) -> None:
    cfg, out = ctx.cfg, ctx.out
    a = cfg.analytics
    snaps = ctx.ensure_snapshots()
    truth = ctx.ensure_truth()
    dets = ctx.ensure_detections()
    routes = ctx.ensure_routes()
    m: dict = {}

    # counting from emitted vehicle tracks
    veh = analytics.track_table(snaps, ObjClass.VEHICLE)
    pred = analytics.count_turns([sorted((f, v[0]) for f, v in h.items()) for _, h in sorted(veh.items())])
    ttc = _truth_turns(routes)
    analytics.write_turn_csv(out / TURNS_CSV, pred)
    analytics.write_turn_csv(out / TRUTH_TURNS_CSV, ttc)
    acc = analytics.counting_accuracy(pred, ttc)
    with open(out / COUNT_CSV, "w") as fh:
        fh.write(f"predicted,truth,accuracy\n{pred.total()},{ttc.total()},{acc:.6f}\n")
    m["counting_accuracy"] = acc

    # social distancing on pedestrian tracks
    ped = analytics.track_table(snaps, ObjClass.PEDESTRIAN)
    raw = analytics.pairwise_violations(analytics.positions_by_frame(ped), a.threshold_m)
    _, kept = analytics.validate_groups(raw, ped, a.window, a.d_group, a.sigma_max, a.cos_min)
    events = analytics.build_events(kept, a.max_gap, a.min_event_frames)
    with open(out / EVENTS_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_a", "track_b", "start_frame", "end_frame", "duration_s", "min_distance_m"])
        for e in events:
            w.writerow([e.pair[0], e.pair[1], e.start_frame, e.end_frame,
                        f"{e.duration(cfg.scene.frame_rate):.4f}", f"{e.min_distance:.4f}"])
    hist = analytics.violation_durations(events, cfg.scene.frame_rate, a.bin_s)
    analytics.write_histogram_csv(out / HIST_CSV, hist, a.bin_s)
    ds = evaluation.score_distancing(ctx.ensure_frames(), snaps, truth, a.threshold_m, a.window, a.d_group,
                                     a.sigma_max, a.cos_min, a.max_gap)
    analytics.write_f1_csv(out / F1_CSV, [("raw", *ds.raw), ("group_validated", *ds.validated)])
    m["distancing_f1"] = {"raw": ds.raw[2], "validated": ds.validated[2]}
    m["violation_events"] = len(events)

    # detection AP and tracking MOTA against truth
    gt = detemu.flatten_truth(truth)
    # AP is undefined without ground truth (an empty scene); the table is then header-only
    ap = detemu.evaluate_ap([d for f in dets for d in f], gt) if len(gt) else {"ap": {}, "map": None}
    with open(out / AP_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "ap"])
        for c, v in ap["ap"].items():
            w.writerow([c.label, f"{v:.6f}"])
        if ap["map"] is not None:
            w.writerow(["mAP", f"{ap['map']:.6f}"])
    mota = evaluate_mota(snaps, truth) if len(gt) else {}
    with open(out / MOTA_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "mota", "gt", "fn", "fp", "idsw"])
        for c, r in mota.items():
            w.writerow([c.label, f"{r.mota:.6f}", r.gt, r.fn, r.fp, r.idsw])
    m["ap"] = {c.label: v for c, v in ap["ap"].items()}
    m["mota"] = {c.label: r.mota for c, r in mota.items()}

    # anonymization audit on evenly spaced frames
    frames = ctx.ensure_frames()
    h = ctx.world_to_px()
    an = cfg.anonymize
    pick = np.unique(np.linspace(0, len(frames) - 1, min(an.audit_frames, len(frames))).astype(int)) if frames else []
    total = {k: anonymize.RecallStats(k) for k in anonymize.KINDS}
    for f in pick:
        regions = sensitive_regions(frames[f], h, ctx.dims, an.identifiable_area_px)
        blur = anonymize.blur_boxes_for_detections(dets[f], *ctx.dims)
        for k, s in anonymize.evaluate_recall(blur, regions, an.area_floor_px, an.coverage_min).items():
            total[k].merge(s)
    anonymize.write_audit_csv(out / AUDIT_CSV, total)
    m["anonymize"] = {k: {"visible_recall": s.visible_recall, "total_recall": s.total_recall} for k, s in total.items()}
    ctx.metrics["analyze"] = m


def open_sink(ctx: Context):
    r = ctx.cfg.radar
    if r.sink == "udp":
        return UdpSink(r.group, r.port)
    if r.sink == "memory":
        return MemorySink()
    return FileSink(ctx.out / CAPTURE)


def stage_broadcast(ctx: Context) -> None:
    cfg = ctx.cfg
    r = cfg.radar
    truth = ctx.ensure_truth()
    n = min(len(truth), int(round(r.realtime_seconds * cfg.scene.frame_rate)))
    sink = open_sink(ctx)
    try:
        res = replay(truth[:n], cfg.scene.frame_rate, cfg.noise, cfg.seed, cfg.latency.model(), cfg.tracker,
                     ctx.px_to_world(), sink, ctx.dims, ctx.mask() if cfg.mask_path else None,
                     cfg.analytics.threshold_m, r.intersection_id, r.mtu, r.queue_depth)
    finally:
        sink.close()
    if res.error is not None:
        raise res.error
    ctx.replay_result = res
    write_traces_csv(ctx.out / TRACES_CSV, res.traces)
    rep = budget_report(res.traces, r.budget_us)
    write_budget_csv(ctx.out / BUDGET_CSV, rep)
    ctx.metrics["broadcast"] = {
        "frames_in": res.frames_in, "frames_out": res.completed, "overwritten": res.overwritten,
        "p50_us": rep.end_to_end[0], "p99_us": rep.end_to_end[1], "violation_rate": rep.violation_rate,
        "sink_drops": rep.dropped,
    }


STAGES = {
    "generate": stage_generate,
    "detect": stage_detect,
    "track": stage_track,
    "analyze": stage_analyze,
    "broadcast": stage_broadcast,
}


def run_stage(name: str, ctx: Context) -> None:
    try:
        STAGES[name](ctx)
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def assertions(ctx: Context) -> list[tuple[str, bool, str]]:
    """Run-level acceptance checks that the produced metrics can answer."""
    m = ctx.metrics
    out = []
    b = m.get("broadcast")
    if b:
        out.append(("latency p99 < budget", b["p99_us"] < ctx.cfg.radar.budget_us, f"p99 {b['p99_us']:.0f} us"))
    an = m.get("analyze")
    if an:
        ap, mota = an["ap"], an["mota"]
        out.append(("pedestrian AP in [0.60, 0.72]", 0.60 <= ap.get("pedestrian", -1) <= 0.72, f"{ap.get('pedestrian', float('nan')):.4f}"))
        out.append(("vehicle AP in [0.95, 0.99]", 0.95 <= ap.get("vehicle", -1) <= 0.99, f"{ap.get('vehicle', float('nan')):.4f}"))
        vm, pm = mota.get("vehicle", -1), mota.get("pedestrian", -1)
        out.append(("vehicle MOTA in [0.70, 0.85] and > pedestrian", 0.70 <= vm <= 0.85 and vm > pm, f"{vm:.4f} vs {pm:.4f}"))
        out.append(("counting accuracy >= 0.95", an["counting_accuracy"] >= 0.95, f"{an['counting_accuracy']:.4f}"))
    return out


def write_manifest(ctx: Context, started: float, checks) -> dict:
    doc = {
        "config_hash": ctx.cfg.digest(),
        "config_source": ctx.cfg.source,
        "artifact_version": __version__,
        "seed": ctx.cfg.seed,
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "metrics": ctx.metrics,
        "assertions": [{"name": n, "passed": ok, "detail": d} for n, ok, d in checks],
    }
    tmp = ctx.out / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
    os.replace(tmp, ctx.out / MANIFEST)
    return doc


def run(cfg: RunConfig, out: str | Path, stages=tuple(STAGES), check: bool = False) -> tuple[dict, list]:
    """Execute the stages in order; the manifest is written last and only on success."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST).unlink(missing_ok=True)
    started = time.time()
    ctx = Context(cfg, out)
    for name in stages:
        run_stage(name, ctx)
    checks = assertions(ctx) if check else []
    return write_manifest(ctx, started, checks), checks
