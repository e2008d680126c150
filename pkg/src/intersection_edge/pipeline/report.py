"""CSV/SVG report bundle built from a finished run directory's logs."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .stages import (
    AP_CSV,
    AUDIT_CSV,
    BUDGET_CSV,
    COUNT_CSV,
    EVENTS_CSV,
    F1_CSV,
    MOTA_CSV,
    TURNS_CSV,
    MissingLog,
    need,
)

REPORT_DIR = "report"

# published reference points the summary compares against
REFERENCE_AP = {"pedestrian": (0.6631, 0.60, 0.72), "vehicle": (0.9758, 0.95, 0.99)}


def _rows(path: Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def duration_histogram(events: list[dict], bin_s: float = 1.0) -> list[tuple[float, int]]:
    hist: dict[float, int] = {}
    for e in events:
        d = float(e["duration_s"])
        k = max(1, math.ceil(round(d / bin_s, 6))) * bin_s
        hist[k] = hist.get(k, 0) + 1
    return sorted(hist.items())


def histogram_svg(hist: list[tuple[float, int]], bin_s: float = 1.0, width: int = 640, height: int = 320) -> str:
    """Bar chart of violation durations; bars sit at their bin's upper edge label."""
    pad_l, pad_b, pad_t, pad_r = 50, 40, 20, 20
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 8}" font-size="12" text-anchor="middle">violation duration (s)</text>',
        f'<text x="14" y="{pad_t + ph / 2:.1f}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {pad_t + ph / 2:.1f})">events</text>',
    ]
    if hist:
        n_bins = int(round(hist[-1][0] / bin_s))
        peak = max(c for _, c in hist)
        bw = pw / max(n_bins, 1)
        for k, c in hist:
            i = int(round(k / bin_s)) - 1
            bh = ph * c / peak
            x = pad_l + i * bw
            parts.append(f'<rect x="{x + 1:.2f}" y="{pad_t + ph - bh:.2f}" width="{max(bw - 2, 1):.2f}" height="{bh:.2f}" fill="#4a78b0"/>')
            parts.append(f'<text x="{x + bw / 2:.2f}" y="{pad_t + ph + 14}" font-size="10" text-anchor="middle">{k:g}</text>')
        parts.append(f'<text x="{pad_l - 4}" y="{pad_t + 10}" font-size="10" text-anchor="end">{peak}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def report(run_dir: str | Path, bin_s: float = 1.0) -> Path:
    """Write ``<run_dir>/report``; the output depends on the logs only."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise MissingLog(f"{run_dir} is not a run directory")
    events = _rows(need(run_dir, EVENTS_CSV))
    ap = _rows(need(run_dir, AP_CSV))
    mota = _rows(need(run_dir, MOTA_CSV))
    turns = _rows(need(run_dir, TURNS_CSV))
    count = _rows(need(run_dir, COUNT_CSV))
    out = run_dir / REPORT_DIR
    out.mkdir(exist_ok=True)

    hist = duration_histogram(events, bin_s)
    _write(out / "violation_histogram.csv", ["bin_upper_s", "count"], [[f"{k:g}", c] for k, c in hist])
    (out / "violation_histogram.svg").write_text(histogram_svg(hist, bin_s))

    ap_rows = []
    for r in ap:
        ref = REFERENCE_AP.get(r["class"])
        v = float(r["ap"])
        if ref:
            ap_rows.append([r["class"], f"{v:.4f}", f"{ref[0]:.4f}", f"[{ref[1]:.2f}, {ref[2]:.2f}]", "yes" if ref[1] <= v <= ref[2] else "no"])
        else:
            ap_rows.append([r["class"], f"{v:.4f}", "", "", ""])
    _write(out / "ap_summary.csv", ["class", "ap", "reference", "band", "in_band"], ap_rows)
    _write(out / "mota_summary.csv", ["class", "mota", "fn", "fp", "idsw", "gt"],
           [[r["class"], f"{float(r['mota']):.4f}", r["fn"], r["fp"], r["idsw"], r["gt"]] for r in mota])
    _write(out / "turn_counts.csv", list(turns[0].keys()) if turns else ["entry"], [list(r.values()) for r in turns])

    lines = [f"counting accuracy: {float(count[0]['accuracy']):.4f} ({count[0]['predicted']} counted, {count[0]['truth']} true)"]
    if (run_dir / BUDGET_CSV).exists():
        b = _rows(run_dir / BUDGET_CSV)
        _write(out / "latency_budget.csv", ["stage", "p50_us", "p99_us"], [[r["stage"], r["p50_us"], r["p99_us"]] for r in b])
        e2e = next((r for r in b if r["stage"] == "end_to_end"), None)
        vr = next((r for r in b if r["stage"] == "violation_rate"), None)
        if e2e:
            lines.append(f"end-to-end latency: p50 {e2e['p50_us']} us, p99 {e2e['p99_us']} us, violation rate {vr['p50_us'] if vr else '?'}")
    if (run_dir / F1_CSV).exists():
        for r in _rows(run_dir / F1_CSV):
            lines.append(f"distancing F1 ({r['variant']}): {float(r['f1']):.4f}")
    if (run_dir / AUDIT_CSV).exists():
        for r in _rows(run_dir / AUDIT_CSV):
            lines.append(f"anonymization {r['kind']}: visible recall {float(r['visible_recall']):.4f}, total recall {float(r['total_recall']):.4f}")
    lines.append(f"violation events: {len(events)}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return out
