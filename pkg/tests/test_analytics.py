import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from intersection_edge import analytics
from intersection_edge.analytics import (
    INCOMPLETE,
    EventBuilder,
    InsufficientOverlap,
    TurnCount,
    ViolationEvent,
    build_events,
    classify_turn,
    count_turns,
    counting_accuracy,
    f1,
    f1_counts,
    group_label,
    pairwise_violations,
    validate_groups,
    violation_durations,
)
from intersection_edge.scenesim.layout import Layout


def _line(p0, p1, n=60):
    return [tuple(p) for p in np.linspace(p0, p1, n)]


def _walk(start, vel, frames, fps=30.0):
    start, vel = np.asarray(start, float), np.asarray(vel, float)
    return {f: (tuple(start + vel * f / fps), tuple(vel)) for f in frames}


class TestTurns:
    def test_straight(self):
        assert classify_turn(_line((-3, 18), (-3, -18))) == "straight"

    def test_left_from_north(self):
        pts = _line((-3, 18), (-3, 0), 30) + _line((0, -3), (18, -3), 30)
        assert classify_turn(pts) == "left"

    def test_u_turn(self):
        pts = _line((-3, 18), (0, 0), 30) + _line((0, 0), (3, 18), 30)
        assert classify_turn(pts) == "u_turn"

    def test_never_leaves_arm(self):
        assert classify_turn(_line((-3, 18), (-3, 12))) == INCOMPLETE

    def test_ends_in_box(self):
        assert classify_turn(_line((-3, 18), (0, 0))) == INCOMPLETE

    def test_frame_pairs_accepted(self):
        pts = _line((-3, 18), (-3, -18))
        assert classify_turn(list(enumerate(pts))) == "straight"

    def test_empty(self):
        assert classify_turn([]) == INCOMPLETE

    def test_counting_accuracy(self):
        truth = TurnCount()
        truth.add("N", "straight", 10)
        pred = TurnCount()
        pred.add("N", "straight", 9)
        pred.add("E", "left", 1)
        assert counting_accuracy(pred, truth) == pytest.approx(0.8)
        assert counting_accuracy(truth, truth) == 1.0
        assert counting_accuracy(TurnCount(), TurnCount()) == 1.0

    def test_counter_monotone(self):
        with pytest.raises(ValueError):
            TurnCount().add("N", "left", -1)

    def test_count_turns(self):
        tc = count_turns([_line((-3, 18), (-3, -18)), _line((-3, 18), (-3, 12))])
        assert tc.total() == 1 and tc.counts[("N", "straight")] == 1


class TestViolations:
    def test_flagged(self):
        assert [r[1:3] for r in pairwise_violations([(0, {1: (0, 0), 2: (0, 1.5)})])] == [(1, 2)]

    def test_strict_boundary(self):
        assert pairwise_violations([(0, {1: (0, 0), 2: (0, 2.0)})]) == []

    def test_three_close(self):
        flags = pairwise_violations([(0, {5: (0, 0), 3: (0.5, 0), 9: (0, 0.5)})])
        assert sorted(r[1:3] for r in flags) == [(3, 5), (3, 9), (5, 9)]

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=0, max_size=12))
    def test_all_pairs_oracle(self, pts):
        pos = {i + 1: p for i, p in enumerate(pts)}
        got = {r[1:3] for r in pairwise_violations([(0, pos)])}
        want = {(a, b) for a in pos for b in pos if a < b and math.dist(pos[a], pos[b]) < 2.0}
        assert got == want


class TestGroups:
    def test_co_walking_group_suppressed(self):
        a = _walk((0, 0), (1.2, 0), range(60))
        b = _walk((0, 0.8), (1.2, 0), range(60))
        raw = pairwise_violations(analytics.positions_by_frame({1: a, 2: b}))
        labels, kept = validate_groups(raw, {1: a, 2: b})
        assert labels[(1, 2)].is_safe_group and kept == [] and len(raw) == 60

    def test_crossing_not_group(self):
        a = _walk((-5, 0), (1.3, 0), range(120))
        b = _walk((5, 1.0), (-1.3, 0), range(120))
        raw = pairwise_violations(analytics.positions_by_frame({1: a, 2: b}))
        labels, kept = validate_groups(raw, {1: a, 2: b})
        assert raw and not labels[(1, 2)].is_safe_group and kept == raw

    def test_insufficient_overlap(self):
        a = _walk((0, 0), (1, 0), range(10))
        with pytest.raises(InsufficientOverlap):
            group_label((1, 2), a, a, window=30)
        raw = pairwise_violations(analytics.positions_by_frame({1: a, 2: _walk((0, 1), (1, 0), range(10))}))
        labels, kept = validate_groups(raw, {1: a, 2: _walk((0, 1), (1, 0), range(10))})
        assert not labels[(1, 2)].is_safe_group and kept == raw


class TestEvents:
    def test_single_second(self):
        ev = build_events([(f, 1, 2, 1.0) for f in range(30)])
        assert len(ev) == 1 and violation_durations(ev, 30.0) == {1.0: 1}

    def test_empty(self):
        assert violation_durations([]) == {}

    def test_one_frame_gap_merges(self):
        flags = [(f, 1, 2, 1.0) for f in range(10)] + [(f, 1, 2, 0.5) for f in range(11, 20)]
        (e,) = build_events(flags)
        assert (e.start_frame, e.end_frame, e.min_distance) == (0, 19, 0.5)

    def test_long_gap_splits(self):
        flags = [(f, 1, 2, 1.0) for f in range(5)] + [(f, 1, 2, 1.0) for f in range(9, 12)]
        assert [(e.start_frame, e.end_frame) for e in build_events(flags)] == [(0, 4), (9, 11)]

    def test_two_seconds(self):
        ev = build_events([(f, 1, 2, 1.0) for f in range(60)])
        assert violation_durations(ev, 30.0) == {2.0: 1}
        ev = build_events([(f, 1, 2, 1.0) for f in range(31)])
        assert violation_durations(ev, 30.0) == {2.0: 1}

    def test_streaming_equals_batch(self):
        r = np.random.default_rng(3)
        flags = [(int(f), int(a), int(a) + 1, 1.0) for f in range(200) for a in (1, 5) if r.random() < 0.5]
        eb = EventBuilder(2)
        for f in range(200):
            eb.feed([x for x in flags if x[0] == f])
            eb.flush(now=f)
        assert eb.events() == build_events(flags)

    def test_malformed_event(self):
        with pytest.raises(ValueError):
            ViolationEvent((2, 1), 0, 1, 0.5)


class TestF1:
    def test_perfect(self):
        assert f1({1, 2}, {1, 2})[2] == 1.0

    def test_counts(self):
        assert f1_counts(8, 2, 2) == pytest.approx((0.8, 0.8, 0.8))

    def test_empty_prediction(self):
        assert f1(set(), {1}) == (0.0, 0.0, 0.0)


def test_csv_writers(tmp_path):
    tc = TurnCount()
    tc.add("S", "right", 3)
    analytics.write_turn_csv(tmp_path / "t.csv", tc)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "entry,left,right,straight,u_turn" and lines[3] == "S,0,3,0,0"
    analytics.write_histogram_csv(tmp_path / "h.csv", {})
    assert (tmp_path / "h.csv").read_text() == "bin_upper_s,count\n"


def test_default_layout_arms():
    lay = Layout()
    assert lay.arm_of(0, 15) == "N" and lay.arm_of(15, 0) == "E" and lay.arm_of(0, 0) is None
