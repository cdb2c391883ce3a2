import csv
import json

import pytest

from pupilpipe.cli import main, sha256_file
from pupilpipe.synthetic import read_ground_truth


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    d = tmp_path_factory.mktemp("chain")
    assert run("synth-cohort", "--participants", 6, "--days", 28, "--seed", 3, "--out", d / "cohort") == 0
    assert run("pir", "--in", d / "cohort/predictions.jsonl", "--out", d / "pir.csv") == 0
    assert run("features", "--pir", d / "pir.csv", "--phq9", d / "cohort/phq9.csv", "--out", d / "feat.csv") == 0
    assert run("analyze", "--in", d / "feat.csv", "--out", d / "corr.csv") == 0
    assert run("train-eval", "--in", d / "feat.csv", "--out", d / "report.csv", "--feature-sets", "tsf",
               "--seed", 3) == 0
    return d


def test_chain_outputs(chain):
    rows = list(csv.reader(open(chain / "report.csv")))
    assert rows[0] == ["feature_set", "acc", "prec", "rec", "f1", "auroc"]
    assert [r[0] for r in rows[1:]] == ["TSF"]
    corr = list(csv.reader(open(chain / "corr.csv")))
    assert len(corr) == 49
    assert (chain / "report.report.json").exists()
    man = json.loads((chain / "report.csv.manifest.json").read_text())
    assert man["seed"] == 3 and man["command"] == "train-eval"
    assert man["outputs"]["report.csv"] == sha256_file(chain / "report.csv")


def test_pir_counts_match_ground_truth(chain):
    sessions, _ = read_ground_truth(chain / "cohort/ground_truth.jsonl")
    expected = sorted(s["expected_frames_used"] for s in sessions if s["expected_frames_used"] > 0)
    with open(chain / "pir.csv") as fh:
        got = sorted(int(r["frames_used"]) for r in csv.DictReader(fh))
    assert got == expected


def test_rerun_is_byte_identical(chain, tmp_path):
    assert run("synth-cohort", "--participants", 6, "--days", 28, "--seed", 3, "--out", tmp_path / "cohort") == 0
    for name in ("predictions.jsonl", "phq9.csv", "ground_truth.jsonl"):
        assert sha256_file(tmp_path / "cohort" / name) == sha256_file(chain / "cohort" / name)
    assert run("train-eval", "--in", chain / "feat.csv", "--out", tmp_path / "report.csv", "--feature-sets", "tsf",
               "--seed", 3) == 0
    assert sha256_file(tmp_path / "report.csv") == sha256_file(chain / "report.csv")


def test_default_seed_announced(tmp_path, capsys):
    assert run("synth-cohort", "--participants", 2, "--days", 14, "--out", tmp_path) == 0
    assert "seed = 0 (default)" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as ei:
        run("synth-cohort", "--participants", 0, "--out", tmp_path)
    assert ei.value.code == 2
    (tmp_path / "x.jsonl").write_text("")
    with pytest.raises(SystemExit) as ei:
        run("pir", "--in", tmp_path / "x.jsonl", "--out", tmp_path / "o.csv", "--threshold", 1.1)
    assert ei.value.code == 2
    with pytest.raises(SystemExit) as ei:
        run("train-eval", "--in", tmp_path / "x.csv", "--out", tmp_path / "r.csv", "--feature-sets", "nope")
    assert ei.value.code == 2


def test_empty_input_ok(tmp_path, capsys):
    (tmp_path / "x.jsonl").write_text("")
    assert run("pir", "--in", tmp_path / "x.jsonl", "--out", tmp_path / "o.csv") == 0
    assert "samples out: 0" in capsys.readouterr().out
    assert (tmp_path / "o.failures.csv").exists()


def test_missing_file(tmp_path):
    assert run("pir", "--in", tmp_path / "absent.jsonl", "--out", tmp_path / "o.csv") == 1


def test_malformed_lines_reported(tmp_path, capsys):
    (tmp_path / "x.jsonl").write_text("{not json\n")
    assert run("pir", "--in", tmp_path / "x.jsonl", "--out", tmp_path / "o.csv") == 0
    out = capsys.readouterr()
    assert "malformed lines: 1" in out.out and "line 1" in out.err


def test_eyes_then_segment(tmp_path):
    assert run("synth-eyes", "--pir", "0.3,0.5", "--iris-radius", "25", "--out", tmp_path / "eyes") == 0
    assert len(list((tmp_path / "eyes").glob("*.pgm"))) == 2
    assert run("segment", "--in", tmp_path / "eyes", "--out", tmp_path / "seg.jsonl") == 0
    assert run("pir", "--in", tmp_path / "seg.jsonl", "--out", tmp_path / "pir.csv") == 0
    with open(tmp_path / "pir.csv") as fh:
        pirs = sorted(float(r["pir"]) for r in csv.DictReader(fh))
    assert pirs == pytest.approx([0.3, 0.5], abs=0.03)
