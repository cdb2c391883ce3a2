import io
import warnings
from collections import Counter

import numpy as np
import pytest

from pupilpipe.core import ClassLabel, EyeSide, group_sessions, write_jsonl
from pupilpipe.features import Epoch
from pupilpipe.pir import estimate_batch
from pupilpipe.synthetic import (
    CohortConfig, EyeRasterSpec, InvalidConfig, InvalidSpec, NoComponent,
    emit_gold_episode_labels, generate_cohort, otsu_two_thresholds, read_ground_truth, read_pgm,
    render_eye_raster, segment_raster, write_ground_truth, write_pgm,
)

from helpers import cohort


def test_raster_geometry():
    r = render_eye_raster(EyeRasterSpec())
    assert r.shape == (64, 64) and r.dtype == np.uint8
    assert r[32, 32] == 30  # pupil
    assert r[32 + 15, 32] == 120  # iris, below the pupil
    assert r[2, 2] == 210  # sclera


def test_raster_invalid():
    with pytest.raises(InvalidSpec):
        render_eye_raster(EyeRasterSpec(iris_radius=10, pir=0.15))  # pupil radius 1.5 px
    with pytest.raises(InvalidSpec):
        render_eye_raster(EyeRasterSpec(iris_radius=40))


def test_raster_deterministic():
    spec = EyeRasterSpec(noise_sd=8)
    assert np.array_equal(render_eye_raster(spec, 3), render_eye_raster(spec, 3))
    assert not np.array_equal(render_eye_raster(spec, 3), render_eye_raster(spec, 4))


def test_pgm_roundtrip():
    r = render_eye_raster(EyeRasterSpec(width=50, height=40, iris_center=(25, 20), iris_radius=15, noise_sd=5))
    buf = io.BytesIO()
    write_pgm(r, buf)
    assert np.array_equal(read_pgm(io.BytesIO(buf.getvalue())), r)
    commented = buf.getvalue().replace(b"P5\n", b"P5\n# made here\n", 1)
    assert np.array_equal(read_pgm(io.BytesIO(commented)), r)


def test_otsu_separates_three_levels():
    r = render_eye_raster(EyeRasterSpec())
    lo, hi = otsu_two_thresholds(r)
    assert 30 < lo <= 120 < hi <= 210


def test_otsu_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    r = np.concatenate([rng.normal(40, 5, 300), rng.normal(120, 8, 500), rng.normal(200, 6, 700)])
    r = np.clip(np.rint(r), 0, 255).astype(np.uint8)
    vals = r.astype(float)
    best, arg = -1.0, None
    for t1 in range(20, 240, 2):
        for t2 in range(t1 + 2, 250, 2):
            groups = [vals[vals < t1], vals[(vals >= t1) & (vals < t2)], vals[vals >= t2]]
            if any(len(g) == 0 for g in groups):
                continue
            between = sum(len(g) * (g.mean() - vals.mean()) ** 2 for g in groups)
            if between > best:
                best, arg = between, (t1, t2)
    lo, hi = otsu_two_thresholds(r)
    # the coarse grid can only be a few levels away from the exact optimum
    assert abs(lo - arg[0]) <= 2 and abs(hi - arg[1]) <= 2


def test_segment_clean_boxes():
    dets = segment_raster(render_eye_raster(EyeRasterSpec()))
    by = {d.class_label: d for d in dets}
    assert abs(by[ClassLabel.IRIS].box.width - 40) <= 2
    assert abs(by[ClassLabel.PUPIL].box.width - 16) <= 2
    assert all(0 < d.score <= 1 for d in dets)


def test_segment_white_raster():
    with pytest.raises(NoComponent) as ei:
        segment_raster(np.full((32, 32), 255, np.uint8))
    assert set(ei.value.missing) == {ClassLabel.IRIS, ClassLabel.PUPIL}


@pytest.mark.parametrize("pir", [0.25, 0.4, 0.6])
def test_segment_noisy_pir(pir):
    spec = EyeRasterSpec(width=80, height=80, iris_center=(40, 40), iris_radius=30, pir=pir, noise_sd=8)
    by = {d.class_label: d for d in segment_raster(render_eye_raster(spec, seed=1))}
    est = by[ClassLabel.PUPIL].box.width / by[ClassLabel.IRIS].box.width
    assert abs(est - pir) <= 0.05


def test_cohort_deterministic():
    cfg = CohortConfig(n_participants=3, days_per_participant=10, seed=7)
    outs = []
    for _ in range(2):
        c = generate_cohort(cfg)
        buf, gt = io.StringIO(), io.StringIO()
        write_jsonl(c.frames, buf)
        write_ground_truth(c.truth, gt)
        outs.append((buf.getvalue(), gt.getvalue(), c.phq9))
    assert outs[0] == outs[1]


def test_cohort_invalid():
    with pytest.raises(InvalidConfig):
        generate_cohort(CohortConfig(n_participants=0))
    with pytest.raises(InvalidConfig):
        generate_cohort(CohortConfig(depressive_frac=1.5))


def test_no_depression():
    c = generate_cohort(CohortConfig(n_participants=6, depressive_frac=0.0, seed=2))
    assert not any(lab for _, _, lab in emit_gold_episode_labels(c.truth))
    assert all(w.phq9_start < 5 or w.phq9_end < 5 for w in c.truth.windows)


def test_planted_morning_sd():
    c = cohort(0)
    groups = {}
    labels = {(w.participant_id, w.window): w.label for w in c.truth.windows}
    for s in c.truth.sessions:
        if s.epoch is Epoch.MORNING and s.eye is EyeSide.RIGHT:
            groups.setdefault(labels[s.participant_id, s.window], []).append(s.true_pir)
    ratio = np.std(groups[True]) / np.std(groups[False])
    assert 1.5 < ratio < 2.5


def test_null_profile_has_no_sd_effect():
    c = cohort(0, "null")
    labels = {(w.participant_id, w.window): w.label for w in c.truth.windows}
    per = {}
    for s in c.truth.sessions:
        if s.epoch is Epoch.MORNING and s.eye is EyeSide.RIGHT:
            per.setdefault(labels[s.participant_id, s.window], []).append(s.true_pir)
    assert 0.8 < np.std(per[True]) / np.std(per[False]) < 1.25


def test_sessions_per_day_near_target():
    c = cohort(0)
    per_day = Counter((s.participant_id, s.start.date()) for s in c.truth.sessions if s.eye is EyeSide.LEFT)
    mean = np.mean(list(per_day.values()))
    assert abs(mean - 11.85) <= 0.1 * 11.85


def test_labels_follow_phq9():
    c = cohort(0)
    for w in c.truth.windows:
        assert w.label == (w.phq9_start >= 5 and w.phq9_end >= 5)
    n_dep = sum(w.label for w in c.truth.windows)
    assert n_dep >= round(14 / 44 * 50)  # relabelling lone gaps can only add


def test_frame_bookkeeping_matches_estimator():
    c = generate_cohort(CohortConfig(n_participants=2, days_per_participant=3, seed=5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        batch = estimate_batch(group_sessions(c.frames))
    expected = {(s.participant_id, s.session_id, s.eye.value): s.expected_frames_used for s in c.truth.sessions}
    got = {(s.participant_id, s.timestamp, s.eye): s.frames_used for s in batch.samples}
    assert len(batch.samples) == sum(v > 0 for v in expected.values())
    assert sorted(got.values()) == sorted(v for v in expected.values() if v > 0)


def test_ground_truth_roundtrip(tmp_path):
    c = generate_cohort(CohortConfig(n_participants=2, days_per_participant=14, seed=1))
    p = tmp_path / "gt.jsonl"
    with open(p, "w") as fh:
        write_ground_truth(c.truth, fh)
    sessions, windows = read_ground_truth(p)
    assert len(sessions) == len(c.truth.sessions) and len(windows) == 2

