"""Command-line entry point.

Every command writes its outputs plus ``<first output>.manifest.json``
recording the command, arguments, config hash, input and output sha256
digests, seed, version and stage timings. Exit codes: 0 ok, 1 I/O failure,
2 invalid arguments, 3 single-class data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import warnings
from datetime import datetime, timedelta
from pathlib import Path

from . import __version__
from .core import EyeSide, FrameRecord, group_sessions, read_jsonl, write_jsonl
from .evaluation import (
    DEFAULT_GRID, FEATURE_SETS, compare_feature_sets, thread_cap, write_report_csv,
)
from .features import (
    PIR_HI, PIR_LO, build_feature_vectors, filter_pir_range, label_days, read_feature_csv, read_phq9_csv,
    windows_from_schedule, write_feature_csv,
)
from .learner import SingleClassAUROC
from .pir import EYE_OPEN_THRESHOLD, estimate_batch, read_pir_csv, write_failures_csv, write_pir_csv
from .stats import SingleClass, correlation_table, write_correlation_csv
from .synthetic import (
    EFFECT_PROFILES, CohortConfig, EyeRasterSpec, InvalidConfig, InvalidSpec, NoComponent, generate_cohort,
    read_pgm, render_eye_raster, segment_raster, write_ground_truth, write_pgm, write_phq9_csv,
)

logger = logging.getLogger("pupilpipe")

EXIT_IO, EXIT_USAGE, EXIT_SINGLE_CLASS = 1, 2, 3


class UsageError(Exception):
    pass


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_hash(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(args, inputs, outputs, timings: dict) -> Path:
    outputs = [Path(p) for p in outputs]
    manifest = {
        "command": args.command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")},
        "config_hash": _config_hash(args),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": {str(p): sha256_file(Path(p)) for p in inputs},
        "outputs": {p.name: sha256_file(p) for p in outputs},
        "timings_s": {k: round(v, 4) for k, v in timings.items()},
    }
    path = outputs[0].with_name(outputs[0].name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _announce_seed(args) -> None:
    note = " (default)" if args.seed_defaulted else ""
    print(f"seed = {args.seed}{note}", file=sys.stderr)


class _Timer:
    def __init__(self):
        self.t = {}

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.t[name] = time.perf_counter() - self.t0

        return _Ctx()


# -- commands -------------------------------------------------------------------


def cmd_synth_cohort(args) -> int:
    if args.participants < 1 or args.days < 1:
        raise UsageError("--participants and --days must be >= 1")
    _announce_seed(args)
    cfg = CohortConfig(n_participants=args.participants, days_per_participant=args.days,
                       depressive_frac=args.depressive_frac, effects=EFFECT_PROFILES[args.effect_profile],
                       seed=args.seed)
    try:
        cfg.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tm = _Timer()
    with tm.stage("generate"):
        cohort = generate_cohort(cfg)
    paths = [out / "predictions.jsonl", out / "phq9.csv", out / "ground_truth.jsonl"]
    with tm.stage("write"):
        with open(paths[0], "w", encoding="utf-8") as fh:
            write_jsonl(cohort.frames, fh)
        with open(paths[1], "w", encoding="utf-8") as fh:
            write_phq9_csv(cohort.phq9, fh)
        with open(paths[2], "w", encoding="utf-8") as fh:
            write_ground_truth(cohort.truth, fh)
    write_manifest(args, [], paths, tm.t)
    print(f"frames: {len(cohort.frames)}  sessions: {len(cohort.truth.sessions)}  "
          f"windows: {len(cohort.truth.windows)}")
    return 0


def cmd_synth_eyes(args) -> int:
    _announce_seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pirs = [float(p) for p in args.pir.split(",")]
    radii = [float(r) for r in args.iris_radius.split(",")]
    specs = []
    for r in radii:
        size = int(2 * r + 2 * args.margin)
        for p in pirs:
            specs.append(EyeRasterSpec(width=size, height=size, iris_center=(size / 2, size / 2),
                                       iris_radius=r, pir=p, noise_sd=args.noise_sd,
                                       eyelid_occlusion_frac=args.eyelid))
    paths = []
    truth = out / "eyes.csv"
    try:
        with open(truth, "w", encoding="utf-8") as tf:
            w = csv.writer(tf, lineterminator="\n")
            w.writerow(["file", "pir", "iris_radius", "center_x", "center_y", "noise_sd", "eyelid"])
            for i, spec in enumerate(specs):
                raster = render_eye_raster(spec, seed=args.seed + i)
                name = f"eye_{i:04d}.pgm"
                with open(out / name, "wb") as fh:
                    write_pgm(raster, fh)
                paths.append(out / name)
                w.writerow([name, f"{spec.pir:.6f}", f"{spec.iris_radius:.6f}", f"{spec.iris_center[0]:.6f}",
                            f"{spec.iris_center[1]:.6f}", f"{spec.noise_sd:.6f}", f"{spec.eyelid_occlusion_frac:.6f}"])
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from exc
    write_manifest(args, [], [truth, *paths], {})
    print(f"rasters: {len(paths)}")
    return 0


def cmd_segment(args) -> int:
    src = Path(args.inp)
    files = sorted(src.glob("*.pgm")) if src.is_dir() else [src]
    if not files:
        raise FileNotFoundError(f"no .pgm files under {src}")
    base = datetime(2000, 1, 1)
    records, failed = [], 0
    for i, path in enumerate(files):
        with open(path, "rb") as fh:
            raster = read_pgm(fh)
        try:
            dets = segment_raster(raster)
        except NoComponent as exc:
            dets = exc.detections
            failed += 1
        records.append(FrameRecord(args.participant, path.stem, EyeSide.LEFT, base + timedelta(seconds=i),
                                   1.0, tuple(dets)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_jsonl(records, fh)
    write_manifest(args, files, [out], {})
    print(f"rasters: {len(files)}  incomplete segmentations: {failed}")
    return 0


def cmd_pir(args) -> int:
    if not 0.0 <= args.threshold <= 1.0:
        raise UsageError("--threshold must be within [0, 1]")
    tm = _Timer()
    with tm.stage("read"):
        records, errors = read_jsonl(args.inp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with tm.stage("estimate"):
            sessions = group_sessions(records)
            batch = estimate_batch(sessions, args.threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fail_path = Path(args.failures) if args.failures else out.with_name(out.stem + ".failures.csv")
    with open(out, "w", encoding="utf-8") as fh:
        write_pir_csv(batch.samples, fh)
    with open(fail_path, "w", encoding="utf-8") as fh:
        write_failures_csv(batch.failures, fh)
    for lineno, msg in errors[:20]:
        print(f"line {lineno}: {msg}", file=sys.stderr)
    write_manifest(args, [args.inp], [out, fail_path], tm.t)
    print(f"sessions in: {len(sessions)}  samples out: {len(batch.samples)}  "
          f"failures: {len(batch.failures)}  malformed lines: {len(errors)}")
    return 0


def cmd_features(args) -> int:
    if not 0.0 <= args.lo < args.hi:
        raise UsageError("need 0 <= --lo < --hi")
    with open(args.pir, encoding="utf-8") as fh:
        samples = read_pir_csv(fh)
    with open(args.phq9, encoding="utf-8") as fh:
        schedule = read_phq9_csv(fh)
    kept = filter_pir_range(samples, args.lo, args.hi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vectors, dropped = build_feature_vectors(kept)
        days = label_days(vectors, windows_from_schedule(schedule))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_feature_csv(days, fh)
    write_manifest(args, [args.pir, args.phq9], [out], {})
    print(f"samples in range: {len(kept)}/{len(samples)}  labeled days: {len(days)}  "
          f"dropped days: {len(dropped)}")
    return 0


def cmd_analyze(args) -> int:
    with open(args.inp, encoding="utf-8") as fh:
        days = read_feature_csv(fh)
    table = correlation_table(days)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_correlation_csv(table, fh, args.paper_format)
    write_manifest(args, [args.inp], [out], {})
    for c in table[:5]:
        print(f"{c.feature_name:28s} r={c.r:+.3f} p={c.p:.2e}")
    return 0


def cmd_train_eval(args) -> int:
    sets = [s.strip().lower() for s in args.feature_sets.split(",") if s.strip()]
    bad = [s for s in sets if s not in FEATURE_SETS]
    if bad or not sets:
        raise UsageError(f"unknown feature sets {bad}; choose from {sorted(FEATURE_SETS)}")
    _announce_seed(args)
    logger.debug("thread cap %d", thread_cap())
    with open(args.inp, encoding="utf-8") as fh:
        days = read_feature_csv(fh)
    selection = "global" if args.paper_faithful else "fold"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = compare_feature_sets(days, args.seed, DEFAULT_GRID, sets, selection)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_report_csv(reports, fh, args.paper_format)
    detail = out.with_name(out.stem + ".report.json")
    detail.write_text("[" + ",".join(r.to_json() for r in reports.values()) + "]\n")
    timings = {f"lopo_{k}": r.timings["total_s"] for k, r in reports.items()}
    write_manifest(args, [args.inp], [out, detail], timings)
    for name, r in reports.items():
        print(f"{name:4s} " + " ".join(f"{h}={v:.3f}" for h, v in zip(["acc", "prec", "rec", "f1", "auroc"],
                                                                   r.metrics.row())))
    return 0


# -- parser ---------------------------------------------------------------------


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pupilpipe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-cohort", help="generate a synthetic cohort")
    p.add_argument("--participants", type=int, default=25)
    p.add_argument("--days", type=int, default=28)
    p.add_argument("--depressive-frac", type=float, default=14 / 44)
    p.add_argument("--effect-profile", choices=sorted(EFFECT_PROFILES), default="planted")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_synth_cohort)

    p = sub.add_parser("synth-eyes", help="render synthetic eye rasters as PGM")
    p.add_argument("--pir", default="0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7")
    p.add_argument("--iris-radius", default="20,30,40")
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--eyelid", type=float, default=0.0)
    p.add_argument("--margin", type=float, default=6.0)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_synth_eyes)

    p = sub.add_parser("segment", help="segment PGM rasters into prediction records")
    p.add_argument("--in", dest="inp", required=True, help="PGM file or directory")
    p.add_argument("--participant", default="SYN")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("pir", help="estimate one PIR per burst and eye")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--failures")
    p.add_argument("--threshold", type=float, default=EYE_OPEN_THRESHOLD)
    p.set_defaults(func=cmd_pir)

    p = sub.add_parser("features", help="daily 48-feature vectors with episode labels")
    p.add_argument("--pir", required=True)
    p.add_argument("--phq9", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lo", type=float, default=PIR_LO)
    p.add_argument("--hi", type=float, default=PIR_HI)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("analyze", help="feature-label correlation table")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--paper-format", action="store_true", help="round reals to 2 dp")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train-eval", help="LOPO evaluation of FS / TSF / All feature sets")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--feature-sets", default="fs,tsf,all")
    p.add_argument("--paper-faithful", action="store_true",
                   help="select features once on all days (leaks held-out labels)")
    p.add_argument("--paper-format", action="store_true", help="round reals to 2 dp")
    _add_seed(p)
    p.set_defaults(func=cmd_train_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if hasattr(args, "seed"):
        args.seed_defaulted = args.seed is None
        if args.seed is None:
            args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (SingleClass, SingleClassAUROC) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGLE_CLASS
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
