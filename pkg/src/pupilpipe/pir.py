"""Pupil-iris ratio estimation from per-frame segmentation boxes.

For one burst: drop frames whose eye-open probability is below the
threshold, pick the best iris and pupil detection in each remaining frame,
take half the horizontal box extent as the radius, and report the ratio of
the mean pupil radius to the mean iris radius over the burst.
"""

from __future__ import annotations

import csv
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .core import (
    BoundingBox, BurstSession, ClassLabel, Detection, EyeSide, FrameRecord, PirSample,
    format_timestamp, parse_timestamp,
)

logger = logging.getLogger(__name__)

EYE_OPEN_THRESHOLD = 0.75
MIN_BOX_WIDTH_PX = 1.0

PIR_CSV_HEADER = [
    "participant_id", "eye", "timestamp", "pir", "iris_radius_px", "pupil_radius_px",
    "center_x", "center_y", "frames_used", "frames_skipped",
]


class SkipReason(str, enum.Enum):
    EYE_CLOSED = "eye_closed"
    MISSING_CLASS = "missing_class"
    DEGENERATE_BOX = "degenerate_box"


class DegenerateBox(ValueError):
    """Box narrower than one pixel; no radius can be read from it."""


class EstimationFailure(Exception):
    """No frame of a burst produced both an iris and a pupil radius."""

    def __init__(self, reason: str = "no_valid_frames", skip_counts: dict | None = None):
        self.reason = reason
        self.skip_counts = dict(skip_counts or {})
        super().__init__(f"{reason}: {self.skip_counts}")


@dataclass(frozen=True)
class InstancePick:
    iris: Detection
    pupil: Detection


def filter_open_frames(session: BurstSession, threshold: float = EYE_OPEN_THRESHOLD):
    """Return ``(kept_frames, n_skipped)``; the comparison is ``prob >= threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    kept = [f for f in session.frames if f.eye_open_prob >= threshold]
    return kept, len(session.frames) - len(kept)


def _best(dets: list[Detection]) -> Detection:
    # max score, then larger box area, then earliest in input order
    best = dets[0]
    for d in dets[1:]:
        if d.score > best.score or (d.score == best.score and d.box.area > best.box.area):
            best = d
    return best


def pick_instances(detections: Sequence[Detection]) -> InstancePick | None:
    """Highest-scoring iris and pupil detection, or ``None`` if a class is absent."""
    iris = [d for d in detections if d.class_label == ClassLabel.IRIS]
    pupil = [d for d in detections if d.class_label == ClassLabel.PUPIL]
    if not iris or not pupil:
        return None
    return InstancePick(_best(iris), _best(pupil))


def box_radius(box: BoundingBox) -> float:
    """Half the horizontal extent of ``box``. Height is ignored."""
    width = box.x2 - box.x1
    if width < MIN_BOX_WIDTH_PX:
        raise DegenerateBox(f"box width {width} < {MIN_BOX_WIDTH_PX} px")
    return width / 2.0


def pupil_center(box: BoundingBox) -> tuple[float, float]:
    """Eye center from the pupil box.

    The vertical coordinate is the bottom edge minus the width-derived
    radius, so it matches the geometric center only for square boxes.
    """
    r = box_radius(box)
    return ((box.x1 + box.x2) / 2.0, box.y2 - r)


def measure_frame(frame: FrameRecord):
    """Return ``(iris_r, pupil_r, center)`` or the :class:`SkipReason` for the frame."""
    pick = pick_instances(frame.detections)
    if pick is None:
        return SkipReason.MISSING_CLASS
    try:
        iris_r = box_radius(pick.iris.box)
        pupil_r = box_radius(pick.pupil.box)
        center = pupil_center(pick.pupil.box)
    except DegenerateBox:
        return SkipReason.DEGENERATE_BOX
    return iris_r, pupil_r, center


def check_containment(pick: InstancePick) -> bool:
    """True when the pupil box lies inside the iris box."""
    i, p = pick.iris.box, pick.pupil.box
    return i.x1 <= p.x1 and i.y1 <= p.y1 and p.x2 <= i.x2 and p.y2 <= i.y2


def estimate_session_pir(
    session: BurstSession, threshold: float = EYE_OPEN_THRESHOLD, strict: bool = False
) -> PirSample:
    """Estimate the pupil-iris ratio for one burst.

    The ratio is mean pupil radius over mean iris radius across the
    contributing frames (ratio of means, not mean of per-frame ratios).

    Parameters
    ----------
    session : BurstSession
    threshold : float
        Minimum eye-open probability, inclusive.
    strict : bool
        Log a warning for frames whose pupil box is not inside the iris box.
        Such frames are still used.

    Raises
    ------
    EstimationFailure
        If no frame contributes.
    """
    kept, n_closed = filter_open_frames(session, threshold)
    skips = Counter({SkipReason.EYE_CLOSED.value: n_closed} if n_closed else {})
    iris_radii, pupil_radii, centers = [], [], []
    for frame in kept:
        m = measure_frame(frame)
        if isinstance(m, SkipReason):
            skips[m.value] += 1
            continue
        if strict:
            pick = pick_instances(frame.detections)
            if not check_containment(pick):
                logger.warning("pupil box outside iris box in %s at %s", session.key, frame.timestamp)
        iris_r, pupil_r, center = m
        iris_radii.append(iris_r)
        pupil_radii.append(pupil_r)
        centers.append(center)

    if not iris_radii:
        raise EstimationFailure("no_valid_frames", skips)

    iris_final = float(np.mean(iris_radii))
    pupil_final = float(np.mean(pupil_radii))
    cx, cy = np.mean(np.asarray(centers), axis=0)
    return PirSample(
        participant_id=session.participant_id,
        eye=session.eye,
        timestamp=session.start,
        pir=pupil_final / iris_final,
        iris_radius_px=iris_final,
        pupil_radius_px=pupil_final,
        eye_center=(float(cx), float(cy)),
        frames_used=len(iris_radii),
        frames_skipped=len(session.frames) - len(iris_radii),
    )


@dataclass
class BatchResult:
    samples: list[PirSample] = field(default_factory=list)
    failures: list[tuple[tuple[str, str, str], EstimationFailure]] = field(default_factory=list)


def estimate_batch(sessions: Iterable[BurstSession], threshold: float = EYE_OPEN_THRESHOLD) -> BatchResult:
    """Run :func:`estimate_session_pir` over ``sessions``, collecting failures by key."""
    out = BatchResult()
    for s in sessions:
        try:
            out.samples.append(estimate_session_pir(s, threshold))
        except EstimationFailure as exc:
            out.failures.append((s.key, exc))
    return out


# -- CSV ---------------------------------------------------------------------


def write_pir_csv(samples: Iterable[PirSample], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PIR_CSV_HEADER)
    for s in samples:
        w.writerow([
            s.participant_id, s.eye.value, format_timestamp(s.timestamp),
            f"{s.pir:.6f}", f"{s.iris_radius_px:.6f}", f"{s.pupil_radius_px:.6f}",
            f"{s.eye_center[0]:.6f}", f"{s.eye_center[1]:.6f}", s.frames_used, s.frames_skipped,
        ])


def read_pir_csv(fh: IO[str]) -> list[PirSample]:
    out = []
    for row in csv.DictReader(fh):
        out.append(PirSample(
            participant_id=row["participant_id"],
            eye=EyeSide(row["eye"]),
            timestamp=parse_timestamp(row["timestamp"]),
            pir=float(row["pir"]),
            iris_radius_px=float(row["iris_radius_px"]),
            pupil_radius_px=float(row["pupil_radius_px"]),
            eye_center=(float(row["center_x"]), float(row["center_y"])),
            frames_used=int(row["frames_used"]),
            frames_skipped=int(row["frames_skipped"]),
        ))
    return out


def write_failures_csv(failures, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["participant_id", "session_id", "eye", "reason", "eye_closed", "missing_class", "degenerate_box"])
    for (pid, sid, eye), exc in failures:
        c = exc.skip_counts
        w.writerow([pid, sid, eye, exc.reason,
                    c.get("eye_closed", 0), c.get("missing_class", 0), c.get("degenerate_box", 0)])
