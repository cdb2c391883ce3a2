import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pupilpipe.core import BoundingBox, EyeSide
from pupilpipe.pir import (
    DegenerateBox, EstimationFailure, SkipReason, box_radius, estimate_batch, estimate_session_pir,
    filter_open_frames, pick_instances, pupil_center, read_pir_csv, write_pir_csv,
)

from helpers import box_w, det, frame, session, widths_session
from oracles import pir_reference


def test_open_filter_boundary_inclusive():
    s = session([frame(prob=p, t=i) for i, p in enumerate([0.9, 0.5, 0.75])])
    kept, skipped = filter_open_frames(s, 0.75)
    assert [f.eye_open_prob for f in kept] == [0.9, 0.75]
    assert skipped == 1


def test_open_filter_extremes():
    s = session([frame(prob=0.0, t=i) for i in range(4)])
    assert filter_open_frames(s, 0.75) == ([], 4)
    assert len(filter_open_frames(s, 0.0)[0]) == 4
    with pytest.raises(ValueError):
        filter_open_frames(s, 1.1)


def test_pick_instances():
    i8, p9 = det("iris", 0.8, box_w(10)), det("pupil", 0.9, box_w(4))
    assert pick_instances([i8, p9]).iris is i8
    i9, p7 = det("iris", 0.9, box_w(12)), det("pupil", 0.7, box_w(4))
    pick = pick_instances([i8, i9, p7])
    assert pick.iris is i9 and pick.pupil is p7
    assert pick_instances([i8, det("iris", 0.6, box_w(10))]) is None


def test_pick_ties_larger_area_then_first():
    small, big = det("iris", 0.9, box_w(10)), det("iris", 0.9, box_w(20))
    p = det("pupil", 0.5, box_w(3))
    assert pick_instances([small, big, p]).iris is big
    twin = det("iris", 0.9, box_w(10))
    assert pick_instances([small, twin, p]).iris is small


def test_box_radius():
    assert box_radius(BoundingBox(0, 0, 10, 8)) == 5.0
    assert box_radius(BoundingBox(100, 50, 140, 92)) == 20.0
    with pytest.raises(DegenerateBox):
        box_radius(BoundingBox(3, 1, 3.5, 4))


def test_pupil_center():
    assert pupil_center(BoundingBox(0, 0, 10, 10)) == (5.0, 5.0)
    assert pupil_center(BoundingBox(10, 20, 30, 50)) == (20.0, 40.0)
    assert pupil_center(BoundingBox(0, 0, 4, 100)) == (2.0, 98.0)


def test_single_frame():
    assert estimate_session_pir(widths_session([(10, 3)])).pir == pytest.approx(0.3)


def test_ratio_of_means():
    s = estimate_session_pir(widths_session([(10, 3), (20, 8)]))
    assert s.iris_radius_px == 7.5 and s.pupil_radius_px == 2.75
    assert s.pir == pytest.approx(2.75 / 7.5, abs=1e-12)
    assert abs(s.pir - 0.35) > 0.01


def test_all_closed_fails():
    with pytest.raises(EstimationFailure) as ei:
        estimate_session_pir(widths_session([(10, 3)] * 3, probs=[0.5] * 3))
    assert ei.value.reason == "no_valid_frames"
    assert ei.value.skip_counts == {SkipReason.EYE_CLOSED.value: 3}


def test_skip_accounting():
    frames = [
        frame([det("iris", 0.9, box_w(10)), det("pupil", 0.9, box_w(3))], t=0),
        frame([det("iris", 0.9, box_w(10))], t=1),
        frame([det("iris", 0.9, box_w(10)), det("pupil", 0.9, box_w(0.5))], t=2),
        frame([], prob=0.1, t=3),
    ]
    s = estimate_session_pir(session(frames))
    assert (s.frames_used, s.frames_skipped) == (1, 3)


def test_strict_mode_logs_but_keeps(caplog):
    far = frame([det("iris", 0.9, box_w(10)), det("pupil", 0.9, box_w(3, x1=50))])
    with caplog.at_level(logging.WARNING):
        s = estimate_session_pir(session([far]), strict=True)
    assert s.frames_used == 1
    assert "outside iris" in caplog.text


def test_batch():
    ok = widths_session([(10, 3)])
    closed = widths_session([(10, 3)], probs=[0.1])
    res = estimate_batch([ok, closed, ok])
    assert len(res.samples) == 2 and len(res.failures) == 1
    assert estimate_batch([]).samples == [] and estimate_batch([]).failures == []
    assert res.samples[0] == estimate_session_pir(ok)


def test_csv_roundtrip():
    samples = estimate_batch([widths_session([(10, 3), (20, 8)])]).samples
    buf = io.StringIO()
    write_pir_csv(samples, buf)
    assert buf.getvalue().splitlines()[1].split(",")[3] == "0.366667"
    back = read_pir_csv(io.StringIO(buf.getvalue()))
    assert back[0].pir == pytest.approx(samples[0].pir, abs=1e-6)
    assert back[0].eye is EyeSide.LEFT


# -- property: agreement with the straight-line reference --------------------------

coord = st.floats(0, 200, allow_nan=False).map(lambda v: round(v, 1))
detection = st.tuples(
    st.sampled_from(["iris", "pupil"]),
    st.sampled_from([0.3, 0.5, 0.5, 0.9, 1.0]),
    coord, coord,
    st.floats(0, 60).map(lambda v: round(v, 1)),
    st.floats(0.5, 60).map(lambda v: round(v, 1)),
).map(lambda t: (t[0], t[1], t[2], t[3], t[2] + t[4], t[3] + t[5]))
frames_st = st.lists(
    st.tuples(st.sampled_from([0.0, 0.5, 0.74, 0.75, 0.9, 1.0]), st.lists(detection, max_size=5)),
    min_size=1, max_size=25,
)


def to_session(raw):
    return session([
        frame([det(c, s, BoundingBox(x1, y1, x2, y2)) for c, s, x1, y1, x2, y2 in dets], prob, t=i)
        for i, (prob, dets) in enumerate(raw)
    ])


@settings(max_examples=300, deadline=None)
@given(frames_st)
def test_matches_reference(raw):
    ref = pir_reference(raw)
    if ref[0] is None:
        with pytest.raises(EstimationFailure) as ei:
            estimate_session_pir(to_session(raw))
        expected = {}
        for r in ref[1]:
            expected[r] = expected.get(r, 0) + 1
        assert ei.value.skip_counts == expected
        return
    pir, im, pm, cx, cy, used, skips = ref
    s = estimate_session_pir(to_session(raw))
    assert s.pir == pytest.approx(pir, abs=1e-9)
    assert (s.iris_radius_px, s.pupil_radius_px) == pytest.approx((im, pm), abs=1e-9)
    assert s.eye_center == pytest.approx((cx, cy), abs=1e-9)
    assert (s.frames_used, s.frames_skipped) == (used, len(skips))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(2, 100), st.floats(0.1, 0.9)), min_size=1, max_size=10),
       st.floats(0.1, 10))
def test_scale_invariance(pairs, k):
    widths = [(w, w * r) for w, r in pairs if w * r >= 1 and w * r * k >= 1 and w * k >= 1]
    if not widths:
        return
    a = estimate_session_pir(widths_session(widths)).pir
    b = estimate_session_pir(widths_session([(wi * k, wp * k) for wi, wp in widths])).pir
    assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(frames_st, st.randoms(use_true_random=False))
def test_frame_order_irrelevant(raw, rnd):
    try:
        a = estimate_session_pir(to_session(raw)).pir
    except EstimationFailure:
        return
    shuffled = raw[:]
    rnd.shuffle(shuffled)
    assert estimate_session_pir(to_session(shuffled)).pir == pytest.approx(a, rel=1e-12)
    assert np.isfinite(a) and a > 0
