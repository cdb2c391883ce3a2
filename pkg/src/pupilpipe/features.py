"""Participant-day feature vectors from PIR samples.

Each day is split into four 6-hour epochs. For each eye and epoch six
statistics of the PIR samples are computed, giving 2 x 6 x 4 = 48 features
named like ``pirRightstd_morning``. Empty cells are filled with the mean of
the same (eye, statistic) over the day's populated epochs.
"""

from __future__ import annotations

import csv
import enum
import itertools
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import IO, Iterable, Sequence

import numpy as np

from .core import EyeSide, PirSample

logger = logging.getLogger(__name__)

PIR_LO, PIR_HI = 0.2, 0.7
PHQ9_CUTOFF = 5
WINDOW_DAYS = 14


class Epoch(str, enum.Enum):
    MIDNIGHT = "midnight"
    MORNING = "morning"
    AFTERNOON = "afternoon"
    EVENING = "evening"


SIDES = ("Left", "Right")
STATS = ("sum", "min", "max", "mean", "median", "std")
EPOCHS = tuple(Epoch)
FEATURE_NAMES = tuple(
    f"pir{side}{stat}_{epoch.value}" for side, stat, epoch in itertools.product(SIDES, STATS, EPOCHS)
)
N_FEATURES = len(FEATURE_NAMES)
_SIDE_INDEX = {EyeSide.LEFT: 0, EyeSide.RIGHT: 1}


class OverlappingWindows(ValueError):
    pass


class DroppedDayWarning(UserWarning):
    pass


def filter_pir_range(samples: Iterable[PirSample], lo: float = PIR_LO, hi: float = PIR_HI) -> list[PirSample]:
    """Keep samples with ``lo <= pir <= hi``, in order."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {lo}, {hi}")
    return [s for s in samples if lo <= s.pir <= hi]


def assign_epoch(ts: datetime | time) -> Epoch:
    hour = ts.hour
    return EPOCHS[hour // 6]


def epoch_stats(pirs: Sequence[float]) -> tuple[float, ...] | None:
    """(sum, min, max, mean, median, std) with population std; ``None`` if empty."""
    if len(pirs) == 0:
        return None
    a = np.asarray(pirs, dtype=float)
    return (float(a.sum()), float(a.min()), float(a.max()), float(a.mean()),
            float(np.median(a)), float(a.std()))


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray  # (48,) in FEATURE_NAMES order
    imputed: np.ndarray  # (48,) bool

    names = FEATURE_NAMES

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])


@dataclass(frozen=True)
class DroppedDay:
    participant_id: str
    date: date
    reason: str = "no samples"


@dataclass(frozen=True)
class EpisodeWindow:
    participant_id: str
    start_date: date
    phq9_start: int
    phq9_end: int

    @property
    def end_date(self) -> date:
        return self.start_date + timedelta(days=WINDOW_DAYS - 1)

    @property
    def label(self) -> bool:
        return episode_label(self.phq9_start, self.phq9_end)

    def contains(self, d: date) -> bool:
        return self.start_date <= d <= self.end_date


@dataclass(frozen=True, eq=False)
class LabeledDay:
    participant_id: str
    date: date
    features: FeatureVector
    label: bool


def episode_label(phq9_start: int, phq9_end: int) -> bool:
    """Depressive iff the PHQ-9 total is at least 5 at both ends of the window."""
    return phq9_start >= PHQ9_CUTOFF and phq9_end >= PHQ9_CUTOFF


def stats_cube(samples: Iterable[PirSample]) -> np.ndarray:
    """(2 sides, 6 stats, 4 epochs) array of statistics, NaN where no sample."""
    cells = defaultdict(list)
    for s in samples:
        cells[_SIDE_INDEX[s.eye], EPOCHS.index(assign_epoch(s.timestamp))].append(s.pir)
    cube = np.full((2, len(STATS), len(EPOCHS)), np.nan)
    for (side, ep), pirs in cells.items():
        cube[side, :, ep] = epoch_stats(pirs)
    return cube


def impute_cube(cube: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Fill NaN cells of a (2, 6, 4) cube with the day mean of their (eye, stat).

    If one eye has no data at all that day, its cells take the mean of the
    same statistic over the other eye's populated epochs. Returns ``None``
    when the cube is entirely empty.
    """
    missing = np.isnan(cube)
    if missing.all():
        return None
    out = cube.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eye_stat_mean = np.nanmean(cube, axis=2)  # (2, 6)
        stat_mean = np.nanmean(cube, axis=(0, 2))  # (6,)
    fill = np.where(np.isnan(eye_stat_mean), stat_mean[None, :], eye_stat_mean)
    out = np.where(missing, fill[:, :, None], out)
    return out, missing


def build_day_vector(samples: Sequence[PirSample], participant_id: str = "", day: date | None = None):
    """Feature vector for one participant-day, or :class:`DroppedDay` if there is no data.

    ``samples`` must already be range filtered.
    """
    res = impute_cube(stats_cube(samples))
    if res is None:
        return DroppedDay(participant_id, day)
    values, missing = res
    return FeatureVector(values.reshape(-1), missing.reshape(-1))


def build_feature_vectors(samples: Iterable[PirSample]):
    """Group samples by participant-day and build one vector per day.

    Returns ``(vectors, dropped)`` where ``vectors`` maps
    ``(participant_id, date)`` to :class:`FeatureVector`, sorted by key.
    """
    by_day = defaultdict(list)
    for s in samples:
        by_day[s.participant_id, s.timestamp.date()].append(s)
    vectors, dropped = {}, []
    for key in sorted(by_day):
        fv = build_day_vector(by_day[key], *key)
        if isinstance(fv, DroppedDay):
            dropped.append(fv)
        else:
            vectors[key] = fv
    return vectors, dropped


def windows_from_schedule(rows: Iterable[tuple[str, str, date, int]]) -> list[EpisodeWindow]:
    """Build two-week windows from PHQ-9 assessments.

    ``rows`` are ``(participant_id, assessment, date, score)``. Consecutive
    assessments of a participant (by date) bound one window starting at the
    earlier assessment.
    """
    per = defaultdict(list)
    for pid, _assessment, d, score in rows:
        per[pid].append((d, int(score)))
    windows = []
    for pid in sorted(per):
        pts = sorted(per[pid])
        for (d0, s0), (_d1, s1) in zip(pts, pts[1:]):
            windows.append(EpisodeWindow(pid, d0, s0, s1))
    return windows


def _check_overlaps(windows: Sequence[EpisodeWindow]) -> None:
    per = defaultdict(list)
    for w in windows:
        per[w.participant_id].append(w)
    for pid, ws in per.items():
        ws = sorted(ws, key=lambda w: w.start_date)
        for a, b in zip(ws, ws[1:]):
            if b.start_date <= a.end_date:
                raise OverlappingWindows(f"{pid}: {a.start_date}..{a.end_date} overlaps {b.start_date}")


def label_days(vectors: dict, windows: Sequence[EpisodeWindow]) -> list[LabeledDay]:
    """Attach each day's containing window label; days outside every window are dropped."""
    _check_overlaps(windows)
    per = defaultdict(list)
    for w in windows:
        per[w.participant_id].append(w)
    out = []
    for (pid, d), fv in sorted(vectors.items()):
        win = next((w for w in per.get(pid, ()) if w.contains(d)), None)
        if win is None:
            msg = f"{pid} {d} lies outside every episode window; dropped"
            logger.warning(msg)
            warnings.warn(msg, DroppedDayWarning, stacklevel=2)
            continue
        out.append(LabeledDay(pid, d, fv, win.label))
    return out


def feature_matrix(days: Sequence[LabeledDay], names: Sequence[str] = FEATURE_NAMES):
    """``(X, y, groups)`` arrays for the given feature names."""
    idx = [FEATURE_NAMES.index(n) for n in names]
    X = np.array([d.features.values[idx] for d in days], dtype=float).reshape(len(days), len(idx))
    y = np.array([d.label for d in days], dtype=bool)
    groups = np.array([d.participant_id for d in days], dtype=object)
    return X, y, groups


# -- CSV ---------------------------------------------------------------------


def read_phq9_csv(fh: IO[str]) -> list[tuple[str, str, date, int]]:
    rows = []
    for r in csv.DictReader(fh):
        score = int(r["score"])
        if not 0 <= score <= 27:
            raise ValueError(f"PHQ-9 score out of range: {score}")
        rows.append((r["participant_id"], r["assessment"], date.fromisoformat(r["date"]), score))
    return rows


def write_feature_csv(days: Sequence[LabeledDay], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["participant_id", "date", "label", *FEATURE_NAMES, *(f"{n}.imputed" for n in FEATURE_NAMES)])
    for d in days:
        w.writerow([
            d.participant_id, d.date.isoformat(), int(d.label),
            *(f"{v:.6f}" for v in d.features.values),
            *(int(m) for m in d.features.imputed),
        ])


def read_feature_csv(fh: IO[str]) -> list[LabeledDay]:
    out = []
    for r in csv.DictReader(fh):
        values = np.array([float(r[n]) for n in FEATURE_NAMES])
        imputed = np.array([r[f"{n}.imputed"] == "1" for n in FEATURE_NAMES])
        out.append(LabeledDay(r["participant_id"], date.fromisoformat(r["date"]),
                              FeatureVector(values, imputed), r["label"] == "1"))
    return out
