"""Builders shared by the test modules."""

import functools
import warnings
from datetime import datetime, timedelta

from pupilpipe.core import BoundingBox, BurstSession, ClassLabel, Detection, EyeSide, FrameRecord, group_sessions
from pupilpipe.features import build_feature_vectors, filter_pir_range, label_days, windows_from_schedule
from pupilpipe.pir import estimate_batch
from pupilpipe.synthetic import EFFECT_PROFILES, CohortConfig, generate_cohort

T0 = datetime(2023, 3, 6, 8, 0, 0)


def box_w(width, x1=10.0, y1=10.0, height=None):
    """Box of given width starting at (x1, y1); square unless ``height`` is given."""
    return BoundingBox(x1, y1, x1 + width, y1 + (width if height is None else height))


def det(cls, score, box):
    return Detection(ClassLabel(cls), score, box)


def frame(dets=(), prob=0.9, t=0, pid="P01", sid="s1", eye=EyeSide.LEFT):
    return FrameRecord(pid, sid, eye, T0 + timedelta(seconds=t), prob, tuple(dets))


def session(frames, pid="P01", sid="s1", eye=EyeSide.LEFT):
    return BurstSession(pid, sid, eye, tuple(frames))


def widths_session(pairs, probs=None):
    """Burst with one (iris, pupil) detection pair per frame, given box widths."""
    probs = probs or [0.9] * len(pairs)
    frames = [frame([det("iris", 0.9, box_w(wi)), det("pupil", 0.9, box_w(wp))], p, t=i)
              for i, ((wi, wp), p) in enumerate(zip(pairs, probs))]
    return session(frames)


@functools.lru_cache(maxsize=None)
def cohort(seed=0, profile="planted", **overrides):
    return generate_cohort(CohortConfig(seed=seed, effects=EFFECT_PROFILES[profile], **overrides))


@functools.lru_cache(maxsize=None)
def cohort_days(seed=0, profile="planted", **overrides):
    """Labeled days of a generated cohort run through the whole pipeline."""
    c = cohort(seed, profile, **overrides)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        batch = estimate_batch(group_sessions(c.frames))
        vectors, _ = build_feature_vectors(filter_pir_range(batch.samples))
        return tuple(label_days(vectors, windows_from_schedule(c.phq9)))
