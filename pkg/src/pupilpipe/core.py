"""Shared data model for segmentation predictions and capture bursts.

A capture burst is the ~10 s, 2.5 Hz run of eye frames recorded after a
trigger. Each frame carries the segmenter output for one eye as a list of
:class:`Detection` objects. Bursts are keyed by
``(participant_id, session_id, eye)``.

The prediction record file is JSONL, one frame per line::

    {"participant_id": "P01", "session_id": "s0001", "eye": "left",
     "timestamp": "2023-03-01T08:15:02", "eye_open_prob": 0.93,
     "detections": [{"class": "iris", "score": 0.97, "box": [x1, y1, x2, y2]}]}
"""

from __future__ import annotations

import enum
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

logger = logging.getLogger(__name__)

#: 2.5 Hz for 10 s, plus slack.
MAX_FRAMES_PER_BURST = 30
MAX_BURST_SPAN_S = 15.0


class EyeSide(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class ClassLabel(str, enum.Enum):
    IRIS = "iris"
    PUPIL = "pupil"


class DuplicateFrameWarning(UserWarning):
    """Two frames share participant, session, eye and timestamp."""


class BurstSpanWarning(UserWarning):
    """A burst is longer or has more frames than a capture burst can."""


class RecordFormatError(ValueError):
    """A prediction record line could not be parsed."""


class BoundingBox(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def scaled(self, s: float) -> "BoundingBox":
        return BoundingBox(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


class Detection(NamedTuple):
    class_label: ClassLabel
    score: float
    box: BoundingBox


class FrameRecord(NamedTuple):
    participant_id: str
    session_id: str
    eye: EyeSide
    timestamp: datetime
    eye_open_prob: float
    detections: tuple[Detection, ...] = ()

    @property
    def key(self) -> tuple[str, str, EyeSide]:
        return (self.participant_id, self.session_id, self.eye)


@dataclass(frozen=True)
class BurstSession:
    participant_id: str
    session_id: str
    eye: EyeSide
    frames: tuple[FrameRecord, ...]

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.participant_id, self.session_id, self.eye.value)

    @property
    def start(self) -> datetime:
        return self.frames[0].timestamp


@dataclass(frozen=True)
class PirSample:
    """One pupil-iris ratio estimate for one eye and one burst."""

    participant_id: str
    eye: EyeSide
    timestamp: datetime
    pir: float
    iris_radius_px: float
    pupil_radius_px: float
    eye_center: tuple[float, float]
    frames_used: int
    frames_skipped: int


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _finite(*values: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


def validate_box(box: BoundingBox) -> list[str]:
    out = []
    if not _finite(box.x1, box.y1, box.x2, box.y2):
        return ["box coordinates not finite"]
    if min(box.x1, box.y1, box.x2, box.y2) < 0:
        out.append("negative box coordinate")
    if box.x2 <= box.x1:
        out.append("x2 ≤ x1")
    if box.y2 <= box.y1:
        out.append("y2 ≤ y1")
    return out


def validate_frame(record: FrameRecord) -> ValidationResult:
    """Collect every contract violation in ``record`` without raising."""
    violations = []
    if not isinstance(record.timestamp, datetime):
        try:
            parse_timestamp(str(record.timestamp))
        except ValueError:
            violations.append("unparseable timestamp")
    p = record.eye_open_prob
    if not _finite(p) or not 0.0 <= p <= 1.0:
        violations.append("eye_open_prob out of [0,1]")
    try:
        EyeSide(record.eye)
    except ValueError:
        violations.append(f"unknown eye {record.eye!r}")
    for i, det in enumerate(record.detections):
        try:
            ClassLabel(det.class_label)
        except ValueError:
            violations.append(f"detection {i}: unknown class {det.class_label!r}")
        if not _finite(det.score) or not 0.0 <= det.score <= 1.0:
            violations.append(f"detection {i}: score out of [0,1]")
        violations.extend(f"detection {i}: {v}" for v in validate_box(det.box))
    return ValidationResult(violations)


def group_sessions(records: Iterable[FrameRecord]) -> list[BurstSession]:
    """Group frame records into bursts.

    Frames are time-sorted within each burst. Bursts are ordered by
    participant, burst start time, then eye, so the result does not depend
    on input order. For duplicate ``(participant, session, eye, timestamp)``
    the first record in input order is kept and a
    :class:`DuplicateFrameWarning` is emitted.
    """
    buckets: dict[tuple, dict[datetime, FrameRecord]] = {}
    for rec in records:
        frames = buckets.setdefault(rec.key, {})
        if rec.timestamp in frames:
            msg = f"duplicate frame {rec.key + (rec.timestamp.isoformat(),)}; keeping first"
            logger.warning(msg)
            warnings.warn(msg, DuplicateFrameWarning, stacklevel=2)
            continue
        frames[rec.timestamp] = rec

    sessions = []
    for (pid, sid, eye), frames in buckets.items():
        ordered = tuple(frames[t] for t in sorted(frames))
        span = (ordered[-1].timestamp - ordered[0].timestamp).total_seconds()
        if span > MAX_BURST_SPAN_S or len(ordered) > MAX_FRAMES_PER_BURST:
            warnings.warn(
                f"burst {(pid, sid, eye.value)} spans {span:.1f} s with {len(ordered)} frames",
                BurstSpanWarning,
                stacklevel=2,
            )
        sessions.append(BurstSession(pid, sid, eye, ordered))
    # Session id breaks ties between bursts starting on the same second.
    sessions.sort(key=lambda s: (s.participant_id, s.start, s.session_id, s.eye.value))
    return sessions


# -- serialization ---------------------------------------------------------


def parse_timestamp(text: str) -> datetime:
    """Parse ``YYYY-MM-DDTHH:MM:SS`` with an optional fractional part."""
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        raise ValueError(f"timestamp must be local civil time, got offset in {text!r}")
    return ts


def format_timestamp(ts: datetime) -> str:
    if ts.microsecond:
        return ts.isoformat(timespec="milliseconds")
    return ts.isoformat(timespec="seconds")


def frame_to_dict(record: FrameRecord) -> dict:
    return {
        "participant_id": record.participant_id,
        "session_id": record.session_id,
        "eye": record.eye.value,
        "timestamp": format_timestamp(record.timestamp),
        "eye_open_prob": record.eye_open_prob,
        "detections": [
            {"class": d.class_label.value, "score": d.score, "box": d.box.as_list()}
            for d in record.detections
        ],
    }


def frame_from_dict(obj: dict) -> FrameRecord:
    try:
        dets = tuple(
            Detection(ClassLabel(d["class"]), float(d["score"]), BoundingBox(*map(float, d["box"])))
            for d in obj["detections"]
        )
        return FrameRecord(
            participant_id=str(obj["participant_id"]),
            session_id=str(obj["session_id"]),
            eye=EyeSide(obj["eye"]),
            timestamp=parse_timestamp(obj["timestamp"]),
            eye_open_prob=float(obj["eye_open_prob"]),
            detections=dets,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordFormatError(str(exc)) from exc


def write_jsonl(records: Iterable[FrameRecord], fh: IO[str]) -> int:
    n = 0
    for rec in records:
        fh.write(json.dumps(frame_to_dict(rec), separators=(",", ":")))
        fh.write("\n")
        n += 1
    return n


def iter_jsonl(lines: Iterable[str], errors: list[tuple[int, str]] | None = None) -> Iterator[FrameRecord]:
    """Yield records from JSONL lines.

    Malformed lines are skipped; when ``errors`` is given, ``(line_number,
    message)`` pairs are appended to it (1-based line numbers).
    """
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield frame_from_dict(json.loads(line))
        except (json.JSONDecodeError, RecordFormatError) as exc:
            if errors is not None:
                errors.append((lineno, str(exc)))
            logger.debug("skipping line %d: %s", lineno, exc)


def read_jsonl(path: str | Path) -> tuple[list[FrameRecord], list[tuple[int, str]]]:
    errors: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        records = list(iter_jsonl(fh, errors))
    return records, errors
