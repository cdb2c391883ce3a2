"""Synthetic eyes and cohorts with known ground truth.

Two generators live here:

* :func:`render_eye_raster` draws a grayscale eye (sclera, iris disk, pupil
  disk) and :func:`segment_raster` recovers iris and pupil boxes from it
  with a classical threshold + connected-component segmenter. Together they
  stand in for a trained segmentation network.
* :func:`generate_cohort` produces per-frame prediction records, a PHQ-9
  schedule and the ground truth behind them for a whole study cohort, with
  depressive-episode effects planted in the PIR distribution.

Raster coordinates: pixel ``(x, y)`` is ``raster[y, x]`` and covers the
square ``[x, x+1) x [y, y+1)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import IO, Sequence

import numpy as np
from scipy import ndimage
from skimage.measure import perimeter

from .core import BoundingBox, ClassLabel, Detection, EyeSide, FrameRecord, format_timestamp
from .features import EPOCHS, WINDOW_DAYS, Epoch, episode_label
from .learner import derive_seed
from .pir import EYE_OPEN_THRESHOLD, MIN_BOX_WIDTH_PX

MIN_PUPIL_RADIUS_PX = 2.0
MIN_COMPONENT_PX = 4
_SUPERSAMPLE = 4


class InvalidSpec(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class NoComponent(ValueError):
    """Segmentation found no usable component for one or both classes.

    ``missing`` lists the classes that failed; ``detections`` holds whatever
    was found.
    """

    def __init__(self, missing: Sequence[ClassLabel], detections: Sequence[Detection] = ()):
        self.missing = list(missing)
        self.detections = list(detections)
        super().__init__("no component for " + ", ".join(c.value for c in self.missing))


# -- rasters ------------------------------------------------------------------


@dataclass(frozen=True)
class EyeRasterSpec:
    width: int = 64
    height: int = 64
    iris_center: tuple[float, float] = (32.0, 32.0)
    iris_radius: float = 20.0
    pir: float = 0.4
    sclera_gray: int = 210
    iris_gray: int = 120
    pupil_gray: int = 30
    noise_sd: float = 0.0
    eyelid_occlusion_frac: float = 0.0

    @property
    def pupil_radius(self) -> float:
        return self.pir * self.iris_radius

    def validate(self) -> None:
        cx, cy = self.iris_center
        r = self.iris_radius
        if not 0.0 < self.pir < 1.0:
            raise InvalidSpec(f"pir must be in (0, 1), got {self.pir}")
        if self.pupil_radius < MIN_PUPIL_RADIUS_PX:
            raise InvalidSpec(f"pupil radius {self.pupil_radius:.2f} px below {MIN_PUPIL_RADIUS_PX}")
        if cx - r < 0 or cy - r < 0 or cx + r > self.width or cy + r > self.height:
            raise InvalidSpec("iris circle does not fit inside the image")
        if not self.pupil_gray < self.iris_gray < self.sclera_gray:
            raise InvalidSpec("need pupil_gray < iris_gray < sclera_gray")
        if self.pupil_gray < 0 or self.sclera_gray > 255:
            raise InvalidSpec("gray levels must be within 0-255")
        if not 0.0 <= self.eyelid_occlusion_frac < 1.0:
            raise InvalidSpec("eyelid_occlusion_frac must be in [0, 1)")
        if self.noise_sd < 0:
            raise InvalidSpec("noise_sd must be >= 0")

    def true_boxes(self) -> dict[ClassLabel, BoundingBox]:
        cx, cy = self.iris_center
        r, rp = self.iris_radius, self.pupil_radius
        return {
            ClassLabel.IRIS: BoundingBox(cx - r, cy - r, cx + r, cy + r),
            ClassLabel.PUPIL: BoundingBox(cx - rp, cy - rp, cx + rp, cy + rp),
        }


def _disk_coverage(spec: EyeRasterSpec, radius: float) -> np.ndarray:
    s = _SUPERSAMPLE
    offs = (np.arange(s) + 0.5) / s
    xs = (np.arange(spec.width)[:, None] + offs[None, :]).reshape(-1)
    ys = (np.arange(spec.height)[:, None] + offs[None, :]).reshape(-1)
    cx, cy = spec.iris_center
    inside = ((xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2) <= radius**2
    return inside.reshape(spec.height, s, spec.width, s).mean(axis=(1, 3))


def render_eye_raster(spec: EyeRasterSpec, seed: int = 0) -> np.ndarray:
    """8-bit grayscale eye: sclera background, iris and pupil disks, optional eyelid, noise.

    Disk edges are anti-aliased by 4x4 supersampling. The eyelid band is a
    sclera-gray strip from the top of the image down over
    ``eyelid_occlusion_frac`` of the iris height.
    """
    spec.validate()
    iris = _disk_coverage(spec, spec.iris_radius)
    pupil = _disk_coverage(spec, spec.pupil_radius)
    img = (spec.sclera_gray * (1.0 - iris)
           + spec.iris_gray * (iris - pupil)
           + spec.pupil_gray * pupil)
    if spec.eyelid_occlusion_frac > 0:
        lid = spec.iris_center[1] - spec.iris_radius + 2 * spec.iris_radius * spec.eyelid_occlusion_frac
        rows = np.arange(spec.height) + 0.5
        img[rows < lid, :] = spec.sclera_gray
    if spec.noise_sd > 0:
        img = img + np.random.default_rng(seed).normal(0.0, spec.noise_sd, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_pgm(raster: np.ndarray, fh: IO[bytes]) -> None:
    h, w = raster.shape
    fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
    fh.write(np.ascontiguousarray(raster, dtype=np.uint8).tobytes())


def read_pgm(fh: IO[bytes]) -> np.ndarray:
    data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    pos += 1  # single whitespace after maxval
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w).copy()


def otsu_two_thresholds(raster: np.ndarray) -> tuple[int, int]:
    """Thresholds ``(t_low, t_high)`` maximizing the 3-class between-class variance.

    Classes are ``v < t_low``, ``t_low <= v < t_high`` and ``v >= t_high``.
    """
    hist = np.bincount(raster.reshape(-1), minlength=256).astype(float)
    p = hist / hist.sum()
    levels = np.arange(256, dtype=float)
    w = np.concatenate([[0.0], np.cumsum(p)])  # w[t] = P(v < t)
    m = np.concatenate([[0.0], np.cumsum(p * levels)])
    mu_t = m[-1]
    t = np.arange(257)
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    w0, w1, w2 = w[t1], w[t2] - w[t1], 1.0 - w[t2]
    m0, m1, m2 = m[t1], m[t2] - m[t1], mu_t - m[t2]
    with np.errstate(divide="ignore", invalid="ignore"):
        var = (np.where(w0 > 0, m0**2 / w0, 0.0) + np.where(w1 > 0, m1**2 / w1, 0.0)
               + np.where(w2 > 0, m2**2 / w2, 0.0))
    var = np.where(t1 < t2, var, -np.inf)
    i, j = np.unravel_index(np.argmax(var), var.shape)
    return int(i), int(j)


def _largest_component(mask: np.ndarray):
    labels, n = ndimage.label(mask)  # default structure is 4-connected
    if n == 0:
        return None
    sizes = np.bincount(labels.reshape(-1))[1:]
    k = int(np.argmax(sizes)) + 1
    if sizes[k - 1] < MIN_COMPONENT_PX:
        return None
    return labels == k


def _component_detection(label: ClassLabel, comp: np.ndarray) -> Detection:
    ys, xs = np.nonzero(comp)
    area = float(comp.sum())
    per = perimeter(comp, neighborhood=4)
    score = 1.0 if per == 0 else min(1.0, 4.0 * math.pi * area / per**2)
    box = BoundingBox(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))
    return Detection(label, float(score), box)


def segment_raster(raster: np.ndarray, pupil_threshold: int | None = None,
                   iris_threshold: int | None = None) -> list[Detection]:
    """Iris and pupil detections from a grayscale eye raster.

    Pixels darker than ``pupil_threshold`` form the pupil mask, pixels darker
    than ``iris_threshold`` the iris-plus-pupil mask; each class is the
    bounding box of the largest 4-connected component of its mask, scored by
    circularity ``4 pi area / perimeter^2``. Thresholds default to a 3-class
    Otsu split of the histogram.

    Raises
    ------
    NoComponent
        If either class has no component of at least 4 pixels.
    """
    raster = np.asarray(raster)
    if raster.ndim != 2:
        raise ValueError("expected a 2-D grayscale raster")
    if pupil_threshold is None or iris_threshold is None:
        t_lo, t_hi = otsu_two_thresholds(raster)
        pupil_threshold = t_lo if pupil_threshold is None else pupil_threshold
        iris_threshold = t_hi if iris_threshold is None else iris_threshold
    dets, missing = [], []
    for label, thr in ((ClassLabel.IRIS, iris_threshold), (ClassLabel.PUPIL, pupil_threshold)):
        comp = _largest_component(raster < thr)
        if comp is None:
            missing.append(label)
        else:
            dets.append(_component_detection(label, comp))
    if missing:
        raise NoComponent(missing, dets)
    return dets


# -- cohorts ------------------------------------------------------------------


@dataclass(frozen=True)
class EffectProfile:
    """Depressive-window changes applied to the PIR generator."""

    morning_right_sd_mult: float = 2.0
    morning_right_mean_shift: float = 0.015
    morning_left_mean_shift: float = -0.012
    evening_count_mult: float = 1.4


EFFECT_PROFILES = {
    "planted": EffectProfile(),
    "null": EffectProfile(1.0, 0.0, 0.0, 1.0),
}


@dataclass(frozen=True)
class CohortConfig:
    n_participants: int = 25
    days_per_participant: int = 28
    sessions_per_day_mean: float = 11.85
    pir_mean_mu: float = 0.33
    pir_mean_sd: float = 0.015
    pir_mean_range: tuple[float, float] = (0.29, 0.41)
    pir_sd_mu: float = 0.03
    pir_sd_sd: float = 0.006
    pir_sd_range: tuple[float, float] = (0.02, 0.07)
    eye_offset_sd: float = 0.006
    depressive_frac: float = 14 / 44
    effects: EffectProfile = field(default_factory=EffectProfile)
    epoch_weights: tuple[float, float, float, float] = (0.08, 0.30, 0.32, 0.30)
    missing_epoch_prob: float = 0.10
    missing_day_prob: float = 0.05
    frames_per_session: int = 25
    frame_rate_hz: float = 2.5
    closed_frame_frac: float = 0.10
    missing_detection_prob: float = 0.03
    distractor_prob: float = 0.05
    box_jitter_px: float = 0.3
    iris_width_range: tuple[float, float] = (60.0, 100.0)
    start_date: date = date(2023, 3, 6)
    seed: int = 0

    def validate(self) -> None:
        if self.n_participants < 1:
            raise InvalidConfig("n_participants must be >= 1")
        if self.days_per_participant < 1:
            raise InvalidConfig("days_per_participant must be >= 1")
        if self.frames_per_session < 1 or self.frame_rate_hz <= 0:
            raise InvalidConfig("need at least one frame and a positive frame rate")
        rates = [self.sessions_per_day_mean, self.pir_mean_sd, self.pir_sd_sd, self.eye_offset_sd,
                 self.box_jitter_px, *self.epoch_weights, self.effects.morning_right_sd_mult,
                 self.effects.evening_count_mult]
        if any(r < 0 for r in rates) or sum(self.epoch_weights) <= 0:
            raise InvalidConfig("rates and weights must be non-negative")
        probs = [self.depressive_frac, self.missing_epoch_prob, self.missing_day_prob,
                 self.closed_frame_frac, self.missing_detection_prob, self.distractor_prob]
        if any(not 0.0 <= p <= 1.0 for p in probs) or self.missing_epoch_prob >= 1.0:
            raise InvalidConfig("probabilities must lie in [0, 1] (missing_epoch_prob < 1)")
        for lo, hi in (self.pir_mean_range, self.pir_sd_range, self.iris_width_range):
            if not 0 < lo <= hi:
                raise InvalidConfig(f"bad range ({lo}, {hi})")

    @property
    def n_windows(self) -> int:
        return math.ceil(self.days_per_participant / WINDOW_DAYS)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        return d


@dataclass
class SessionTruth:
    participant_id: str
    session_id: str
    eye: EyeSide
    start: datetime
    epoch: Epoch
    window: int
    true_pir: float
    expected_frames_used: int


@dataclass
class WindowTruth:
    participant_id: str
    window: int
    start_date: date
    phq9_start: int
    phq9_end: int
    label: bool


@dataclass
class GroundTruth:
    config: dict
    sessions: list[SessionTruth] = field(default_factory=list)
    windows: list[WindowTruth] = field(default_factory=list)


@dataclass
class Cohort:
    frames: list[FrameRecord]
    phq9: list[tuple[str, str, date, int]]
    truth: GroundTruth


def _truncnorm(rng, mu, sd, lo, hi, size=None):
    # rejection sampling; the ranges used here hold most of the mass
    out = np.atleast_1d(rng.normal(mu, sd, size))
    bad = (out < lo) | (out > hi)
    while bad.any():
        out[bad] = rng.normal(mu, sd, int(bad.sum()))
        bad = (out < lo) | (out > hi)
    return out if size is not None else float(out[0])


def _phq9_scores(labels: Sequence[bool], rng) -> list[int]:
    """Assessment scores such that window ``k`` is depressive iff ``labels[k]``."""
    n = len(labels)
    high = lambda: int(rng.integers(5, 21))  # noqa: E731
    low = lambda: int(rng.integers(0, 5))  # noqa: E731
    scores = [None] * (n + 1)
    for k, lab in enumerate(labels):
        if lab:
            scores[k] = scores[k] if scores[k] is not None else high()
            scores[k + 1] = high()
    for k, lab in enumerate(labels):
        if lab:
            continue
        a, b = scores[k], scores[k + 1]
        if a is not None and a < 5 or b is not None and b < 5:
            continue
        if b is None:
            scores[k + 1] = low()
        elif a is None:
            scores[k] = low()
        else:
            raise InvalidConfig("a non-depressive window between two depressive ones is infeasible")
    scores = [s if s is not None else int(rng.integers(0, 13)) for s in scores]
    assert all(episode_label(scores[k], scores[k + 1]) == bool(lab) for k, lab in enumerate(labels))
    return scores


def _participant(cfg: CohortConfig, index: int, labels: Sequence[bool]):
    pid = f"P{index + 1:02d}"
    rng = np.random.default_rng(derive_seed(cfg.seed, 1, index))
    eff = cfg.effects

    base_mean = _truncnorm(rng, cfg.pir_mean_mu, cfg.pir_mean_sd, *cfg.pir_mean_range)
    base_sd = _truncnorm(rng, cfg.pir_sd_mu, cfg.pir_sd_sd, *cfg.pir_sd_range)
    means = {e: float(np.clip(base_mean + rng.normal(0, cfg.eye_offset_sd), *cfg.pir_mean_range)) for e in EyeSide}
    sds = {e: float(np.clip(base_sd + rng.normal(0, cfg.eye_offset_sd / 2), *cfg.pir_sd_range)) for e in EyeSide}
    iris_width = float(rng.uniform(*cfg.iris_width_range))

    w = np.asarray(cfg.epoch_weights, dtype=float)
    w = w / w.sum()
    dep_boost = 1.0 + cfg.depressive_frac * (eff.evening_count_mult - 1.0) * w[EPOCHS.index(Epoch.EVENING)]
    base_rate = cfg.sessions_per_day_mean / dep_boost / (1.0 - cfg.missing_epoch_prob)

    phq = _phq9_scores(labels, rng)
    windows = [
        WindowTruth(pid, k, cfg.start_date + timedelta(days=WINDOW_DAYS * k), phq[k], phq[k + 1], bool(labels[k]))
        for k in range(len(labels))
    ]
    phq_rows = [(pid, name, cfg.start_date + timedelta(days=WINDOW_DAYS * k), phq[k])
                for k, name in enumerate(_assessment_names(len(labels)))]

    plan = []
    n_frames = cfg.frames_per_session
    frame_dt = [timedelta(seconds=round(k / cfg.frame_rate_hz, 3)) for k in range(n_frames)]
    serial = 0
    for day in range(cfg.days_per_participant):
        if rng.random() < cfg.missing_day_prob:
            continue
        win = day // WINDOW_DAYS
        dep = bool(labels[win])
        day0 = datetime.combine(cfg.start_date + timedelta(days=day), datetime.min.time())
        starts = []
        for e, epoch in enumerate(EPOCHS):
            if rng.random() < cfg.missing_epoch_prob:
                continue
            rate = base_rate * w[e] * (eff.evening_count_mult if dep and epoch is Epoch.EVENING else 1.0)
            n = int(rng.poisson(rate))
            secs = np.sort(rng.integers(0, 6 * 3600 - 11, size=n))
            starts.extend((day0 + timedelta(seconds=int(6 * 3600 * e + s)), epoch) for s in secs)
        for start, epoch in starts:
            serial += 1
            sid = f"{pid}-s{serial:05d}"
            for eye in EyeSide:
                mu, sd = means[eye], sds[eye]
                if dep and epoch is Epoch.MORNING:
                    if eye is EyeSide.RIGHT:
                        mu += eff.morning_right_mean_shift
                        sd *= eff.morning_right_sd_mult
                    else:
                        mu += eff.morning_left_mean_shift
                plan.append((sid, eye, start, epoch, win, mu, sd))

    if not plan:
        return [], [], windows, phq_rows
    mu = np.array([p[5] for p in plan])
    sd = np.array([p[6] for p in plan])
    true_pir = np.clip(rng.normal(mu, sd), 0.05, 0.95)
    frames, used = _burst_frames(cfg, rng, pid, plan, frame_dt, iris_width, true_pir)
    truths = [SessionTruth(pid, sid, eye, start, epoch, win, float(tp), int(u))
              for (sid, eye, start, epoch, win, _, _), tp, u in zip(plan, true_pir, used)]
    return frames, truths, windows, phq_rows


def _assessment_names(n_windows: int) -> list[str]:
    if n_windows == 2:
        return ["baseline", "midpoint", "endpoint"]
    return ["baseline"] + [f"followup{k}" for k in range(1, n_windows)] + ["endpoint"]


def _burst_frames(cfg, rng, pid, plan, frame_dt, iris_width, true_pir):
    """Frame records for every planned burst; returns ``(frames, usable_per_burst)``."""
    shape = (len(plan), len(frame_dt))
    closed = rng.random(shape) < cfg.closed_frame_frac
    prob = np.where(closed, rng.uniform(0.0, EYE_OPEN_THRESHOLD, shape),
                    rng.uniform(EYE_OPEN_THRESHOLD, 1.0, shape))
    iris_w = iris_width + rng.normal(0, cfg.box_jitter_px, shape)
    pupil_w = true_pir[:, None] * iris_width + rng.normal(0, cfg.box_jitter_px, shape)
    cx = 120.0 + rng.normal(0, 1.0, shape)
    cy = 90.0 + rng.normal(0, 1.0, shape)
    drop = rng.random(shape) < cfg.missing_detection_prob
    drop_pupil = rng.random(shape) < 0.5
    distract = (rng.random(shape) < cfg.distractor_prob).tolist()
    iris_score = np.round(rng.uniform(0.85, 0.99, shape), 4).tolist()
    pupil_score = np.round(rng.uniform(0.6, 0.95, shape), 4).tolist()
    iris_boxes = np.round(np.stack([cx - iris_w / 2, cy - iris_w / 2, cx + iris_w / 2, cy + iris_w / 2], -1), 2)
    pupil_boxes = np.round(np.stack([cx - pupil_w / 2, cy - pupil_w / 2, cx + pupil_w / 2, cy + pupil_w / 2], -1), 2)
    has_iris = ~(drop & ~drop_pupil)
    has_pupil = ~(drop & drop_pupil)
    prob = np.round(prob, 4)
    usable = (
        (prob >= EYE_OPEN_THRESHOLD) & has_iris & has_pupil
        & (iris_boxes[..., 2] - iris_boxes[..., 0] >= MIN_BOX_WIDTH_PX)
        & (pupil_boxes[..., 2] - pupil_boxes[..., 0] >= MIN_BOX_WIDTH_PX)
    ).sum(axis=1)

    iris_cls, pupil_cls = ClassLabel.IRIS, ClassLabel.PUPIL
    frames = []
    ib_all, pb_all = iris_boxes.tolist(), pupil_boxes.tolist()
    hi_all, hp_all, p_all = has_iris.tolist(), has_pupil.tolist(), prob.tolist()
    for j, (sid, eye, start, *_rest) in enumerate(plan):
        for k, dt in enumerate(frame_dt):
            dets = []
            if hi_all[j][k]:
                dets.append(Detection(iris_cls, iris_score[j][k], BoundingBox(*ib_all[j][k])))
            if hp_all[j][k]:
                pb = pb_all[j][k]
                dets.append(Detection(pupil_cls, pupil_score[j][k], BoundingBox(*pb)))
                if distract[j][k]:
                    wide = BoundingBox(pb[0] - 3, pb[1] - 3, pb[2] + 3, pb[3] + 3)
                    dets.append(Detection(pupil_cls, round(pupil_score[j][k] * 0.5, 4), wide))
            frames.append(FrameRecord(pid, sid, eye, start + dt, p_all[j][k], tuple(dets)))
    return frames, usable


def generate_cohort(config: CohortConfig) -> Cohort:
    """Generate prediction records, PHQ-9 schedule and ground truth for a cohort.

    Window labels are assigned first from the master seed (exactly
    ``round(depressive_frac * n_windows_total)`` depressive windows); each
    participant is then generated from its own sub-seed.
    """
    config.validate()
    n_win = config.n_windows
    total = config.n_participants * n_win
    n_dep = int(round(config.depressive_frac * total))
    rng = np.random.default_rng(derive_seed(config.seed, 0))
    flat = np.zeros(total, dtype=bool)
    flat[rng.permutation(total)[:n_dep]] = True
    labels = flat.reshape(config.n_participants, n_win)
    # Adjacent windows share a PHQ-9 assessment, so a lone non-depressive
    # window between two depressive ones cannot be scored; relabel it.
    for k in range(1, n_win - 1):
        labels[:, k] |= labels[:, k - 1] & labels[:, k + 1]

    truth = GroundTruth(config.to_dict())
    frames, phq = [], []
    for i in range(config.n_participants):
        fr, st, wt, ph = _participant(config, i, labels[i])
        frames.extend(fr)
        truth.sessions.extend(st)
        truth.windows.extend(wt)
        phq.extend(ph)
    return Cohort(frames, phq, truth)


def emit_gold_episode_labels(truth: GroundTruth) -> list[tuple[str, int, bool]]:
    return [(w.participant_id, w.window, episode_label(w.phq9_start, w.phq9_end)) for w in truth.windows]


def day_labels(truth: GroundTruth) -> dict[tuple[str, date], bool]:
    """Ground-truth episode label of every calendar day covered by a window."""
    out = {}
    for w in truth.windows:
        for k in range(WINDOW_DAYS):
            out[w.participant_id, w.start_date + timedelta(days=k)] = w.label
    return out


# -- writers ------------------------------------------------------------------


def write_phq9_csv(rows, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["participant_id", "assessment", "date", "score"])
    for pid, name, d, score in rows:
        w.writerow([pid, name, d.isoformat(), score])


def write_ground_truth(truth: GroundTruth, fh: IO[str]) -> None:
    for s in truth.sessions:
        fh.write(json.dumps({
            "type": "session", "participant_id": s.participant_id, "session_id": s.session_id,
            "eye": s.eye.value, "start": format_timestamp(s.start), "epoch": s.epoch.value,
            "window": s.window, "true_pir": round(s.true_pir, 9),
            "expected_frames_used": s.expected_frames_used,
        }, separators=(",", ":")) + "\n")
    for w in truth.windows:
        fh.write(json.dumps({
            "type": "window", "participant_id": w.participant_id, "window": w.window,
            "start_date": w.start_date.isoformat(),
            "end_date": (w.start_date + timedelta(days=WINDOW_DAYS - 1)).isoformat(),
            "phq9_start": w.phq9_start, "phq9_end": w.phq9_end, "label": w.label,
        }, separators=(",", ":")) + "\n")


def read_ground_truth(path: str | Path) -> tuple[list[dict], list[dict]]:
    sessions, windows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            (sessions if obj["type"] == "session" else windows).append(obj)
    return sessions, windows
