import csv
import os

import pytest
import yaml

from nvbehavior.cli import EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main

FAST = {
    "synth": {"n_control": 3, "n_clinical": 2, "segment_s": 10.0},
    "classifier": {"n_seeds": 2, "rounds": 10},
    "nod_grid": {"amplitude_coeff": [2.0], "prominence_frac": [0.5], "dominance_ratio": [1.5]},
}


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for k in list(os.environ):
        if k.startswith("NVB_"):
            monkeypatch.delenv(k)


def write_config(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohort")
    cfg = write_config(root / "fast.yaml", FAST)
    assert main(["synth", "--config", cfg, "--out", str(root / "data"), "--seed", "1"]) == EXIT_OK
    return root, cfg


def tree(d):
    out = {}
    for base, _, files in os.walk(d):
        for f in files:
            p = os.path.join(base, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, d)] = fh.read()
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_is_deterministic(cohort, tmp_path):
    root, cfg = cohort
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "again"), "--seed", "1"]) == 0
    assert tree(root / "data") == tree(tmp_path / "again")
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "other"), "--seed", "2"]) == 0
    assert tree(root / "data") != tree(tmp_path / "other")


def test_empty_input(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["detect", "--input", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "no sessions found" in capsys.readouterr().err


def test_bad_config_and_usage(tmp_path, capsys):
    assert main(["detect", "--config", str(tmp_path / "missing.yaml"), "--input", ".",
                 "--out", str(tmp_path)]) == EXIT_USAGE
    cfg = write_config(tmp_path / "bad.yaml", {"thresholds": {"smile": 2}})
    assert main(["detect", "--config", cfg, "--input", ".", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_detect_report_pipeline(cohort, tmp_path):
    root, cfg = cohort
    det = tmp_path / "det"
    assert main(["detect", "--config", cfg, "--input", str(root / "data"), "--out", str(det)]) == 0
    bundles = sorted(p for p in os.listdir(det) if (det / p).is_dir())
    assert bundles == ["P01", "P02", "P03", "P04", "P05"]
    header = (det / "P01" / "tracks.csv").read_text().splitlines()[0]
    for col in ("nod|nod_detector", "smile|au12", "gaze_off|eye_contact", "gaze_off|gaze_geometry"):
        assert col in header
    rep = tmp_path / "rep"
    assert main(["report", "--config", cfg, "--input", str(det), "--out", str(rep)]) == 0
    stats = read_csv(rep / "stats.csv")
    comparisons = {(r["behavior"], r["comparison"]) for r in stats}
    assert any(c[0] == "gaze_off" and "75" in c[1] for c in comparisons)
    assert {"agreement.csv", "percent_time.csv", "summary.txt", "classification_auc.csv",
            "model.json"} <= set(os.listdir(rep))


def test_corrupt_file_gives_partial_failure(cohort, tmp_path, capsys):
    root, cfg = cohort
    data = tmp_path / "data"
    for rel, blob in tree(root / "data").items():
        (data / os.path.dirname(rel)).mkdir(parents=True, exist_ok=True)
        (data / rel).write_bytes(blob)
    frames = data / "P03" / "frames.csv"
    lines = frames.read_text().splitlines()
    lines[5] = "garbage," + lines[5]
    frames.write_text("\n".join(lines) + "\n")
    det = tmp_path / "det"
    assert main(["detect", "--config", cfg, "--input", str(data), "--out", str(det)]) == EXIT_PARTIAL
    assert not (det / "P03").exists() and (det / "P04" / "tracks.csv").exists()
    errors = read_csv(det / "detect_errors.csv")
    assert [e["participant"] for e in errors] == ["P03"]
    assert "row 6" in errors[0]["error"]


def test_stats_only_config_skips_classifier(cohort, tmp_path):
    root, cfg = cohort
    det = tmp_path / "det"
    assert main(["detect", "--config", cfg, "--input", str(root / "data"), "--out", str(det)]) == 0
    stats_only = write_config(tmp_path / "s.yaml", {"classifier": {"enabled": False}})
    rep = tmp_path / "rep"
    assert main(["report", "--config", cfg, "--config", stats_only, "--input", str(det),
                 "--out", str(rep)]) == 0
    assert not (rep / "model.json").exists() and (rep / "stats.csv").exists()


def test_two_participants_classification_refused(tmp_path, capsys):
    cfg = write_config(tmp_path / "two.yaml", {**FAST, "synth": {"n_control": 1, "n_clinical": 1,
                                                                    "segment_s": 10.0}})
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
    assert main(["detect", "--config", cfg, "--input", str(tmp_path / "d"), "--out", str(tmp_path / "det")]) == 0
    assert main(["report", "--config", cfg, "--input", str(tmp_path / "det"), "--out", str(tmp_path / "r")]) == 0
    assert "classification refused" in capsys.readouterr().err
    assert "refused" in (tmp_path / "r" / "summary.txt").read_text()


def test_calibrate_recovers_smile_boundary(cohort, tmp_path):
    root, cfg = cohort
    out = tmp_path / "cal"
    assert main(["calibrate", "--config", cfg, "--input", str(root / "data"), "--out", str(out)]) == 0
    calib = yaml.safe_load((out / "calibration.yaml").read_text())
    assert abs(calib["thresholds"]["smile"] - 0.65) <= 0.1 + 1e-12
    rows = read_csv(out / "sweep_smile.csv")
    assert sorted({float(r["threshold"]) for r in rows}) == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    # the calibration file is a valid config layer for detect
    assert main(["detect", "--config", cfg, "--config", str(out / "calibration.yaml"),
                 "--input", str(root / "data"), "--out", str(tmp_path / "det"), "--only", "P02"]) == 0
    assert os.listdir(tmp_path / "det").count("P02") == 1


def test_calibrate_without_annotations(cohort, tmp_path, capsys):
    root, cfg = cohort
    data = tmp_path / "data"
    for rel, blob in tree(root / "data").items():
        if rel.endswith("annotations.csv"):
            continue
        (data / os.path.dirname(rel)).mkdir(parents=True, exist_ok=True)
        (data / rel).write_bytes(blob)
    assert main(["calibrate", "--config", cfg, "--input", str(data), "--out", str(tmp_path / "c")]) == EXIT_USAGE
    assert "no annotations" in capsys.readouterr().err
