import hashlib
import json
import logging
import subprocess
import sys

import pytest

from facemixup.cli import main
from facemixup.dataset import read_jsonl


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "synth"
    assert main(["synth", "--n-per-class", "4", "--seed", "3", "--test-per-class", "2", "--out", str(d)]) == 0
    return d


def test_synth_counts_and_digest(tmp_path, capsys):
    args = ["synth", "--n-per-class", "200", "--classes", "3", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert len(list((tmp_path / "a/images").glob("*.png"))) == 600
    assert len(read_jsonl(tmp_path / "a/manifest.jsonl")) == 600
    assert digest(tmp_path / "a/manifest.jsonl") == digest(tmp_path / "b/manifest.jsonl")
    run = json.loads((tmp_path / "a/run.json").read_text())
    assert run["command"] == "synth" and run["seed"] == 7 and run["n_per_class"] == 200
    assert "manifest.jsonl" in capsys.readouterr().out


def test_synth_missing_out_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["synth", "--n-per-class", "2"])
    assert e.value.code == 2


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as e:
        main(["count", "--n", "3", "--bogus"])
    assert e.value.code == 2


def test_count_outputs(capsys):
    assert main(["count", "--n", "1000"]) == 0
    assert capsys.readouterr().out.split() == ["62937000"]
    assert main(["count", "--n", "1000", "--paper-compat"]) == 0
    out = capsys.readouterr().out.split()
    assert out == ["62937000", "61938000"]
    assert all(int(v) > 61_000_000 for v in out)
    assert main(["count", "--n", "1"]) == 0
    assert capsys.readouterr().out.split() == ["0"]


def test_count_negative_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["count", "--n", "-1"])
    assert e.value.code == 2


def test_generate_facemixup(synth_dir, tmp_path):
    out = tmp_path / "mix"
    assert main(["generate", "--method", "facemixup", "--manifest", str(synth_dir / "manifest.jsonl"),
                 "--count", "1000", "--seed", "1", "--out", str(out)]) == 0
    rows = read_jsonl(out / "metadata.jsonl")
    assert len(rows) == 1000
    keys = {"mixed_path", "supplier", "receiver", "gamma", "components", "label_supplier", "label_receiver", "seed"}
    for r in rows:
        assert keys <= set(r)
        assert r["label_supplier"] != r["label_receiver"]
        assert len(r["components"]) == r["gamma"]
    assert not any(r["duplicate"] for r in rows)


def test_generate_cutmix_soft_labels(synth_dir, tmp_path):
    out = tmp_path / "cm"
    assert main(["generate", "--method", "cutmix", "--manifest", str(synth_dir / "manifest.jsonl"),
                 "--count", "20", "--seed", "1", "--out", str(out)]) == 0
    rows = read_jsonl(out / "metadata.jsonl")
    assert len(rows) == 20
    for r in rows:
        num, den = r["area_frac"]
        assert len(r["label"]) == 3 and abs(sum(r["label"]) - 1) < 1e-9
        if r["sources"][0] != r["sources"][1]:
            assert max(r["label"]) <= 1.0


def test_generate_exhausts_tiny_space(tmp_path, caplog):
    src = tmp_path / "two"
    assert main(["synth", "--n-per-class", "1", "--classes", "happy,sad", "--seed", "0", "--out", str(src)]) == 0
    out = tmp_path / "mix"
    with caplog.at_level(logging.WARNING):
        assert main(["generate", "--manifest", str(src / "manifest.jsonl"), "--count", "140",
                     "--seed", "2", "--out", str(out)]) == 0
    rows = read_jsonl(out / "metadata.jsonl")
    assert len(rows) == 140
    assert sum(r["duplicate"] for r in rows) == 14
    uniq = {(r["supplier"], r["receiver"], tuple(r["components"])) for r in rows}
    assert len(uniq) == 126
    assert any("126" in rec.getMessage() or "duplicate" in rec.getMessage() for rec in caplog.records)


def test_train_then_eval(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 3, "lr": 0.05, "downsample": [16, 16]}))
    out = tmp_path / "run"
    assert main(["train", "--method", "vanilla", "--config", str(cfg),
                 "--train-manifest", str(synth_dir / "manifest.jsonl"),
                 "--test-manifest", str(synth_dir / "test_manifest.jsonl"), "--out", str(out)]) == 0
    for name in ("model.bin", "model.bin.json", "report.json", "curve.csv", "run.json"):
        assert (out / name).exists()
    capsys.readouterr()
    assert main(["eval", "--model", str(out / "model.bin"), "--manifest", str(synth_dir / "test_manifest.jsonl"),
                 "--out", str(tmp_path / "ev")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert 0.0 <= rep["accuracy"] <= 1.0
    assert rep["accuracy"] == json.loads((out / "report.json").read_text())["accuracy"]


def test_train_facemixup_rs_curve_rows(synth_dir, tmp_path):
    mix = tmp_path / "mix"
    assert main(["generate", "--manifest", str(synth_dir / "manifest.jsonl"), "--count", "30",
                 "--seed", "4", "--out", str(mix)]) == 0
    out = tmp_path / "rs"
    assert main(["train", "--method", "facemixup_rs", "--epochs", "4", "--downsample", "16x16",
                 "--train-manifest", str(synth_dir / "manifest.jsonl"),
                 "--mixed", str(mix / "metadata.jsonl"), "--out", str(out)]) == 0
    lines = (out / "curve.csv").read_text().splitlines()
    assert lines[0] == "epoch,accuracy,loss"
    assert len(lines) - 1 == 4


def test_train_builds_mixed_in_memory(synth_dir, tmp_path):
    out = tmp_path / "fm"
    assert main(["train", "--method", "facemixup", "--epochs", "2", "--downsample", "8x8", "--mixed-ratio", "1",
                 "--train-manifest", str(synth_dir / "manifest.jsonl"), "--out", str(out)]) == 0
    assert json.loads((out / "model.bin.json").read_text())["config"]["method"] == "facemixup"


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("FACEMIX_SEED", "11")
    assert main(["count", "--n", "3", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "run.json").read_text())["seed"] == 11


def test_runtime_error_exit_code(tmp_path, capsys):
    assert main(["generate", "--manifest", str(tmp_path / "missing.jsonl"), "--count", "3",
                 "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_compare_table_shape(tmp_path, capsys):
    assert main(["compare", "--methods", "vanilla,facemixup", "--seeds", "2", "--n-train-per-class", "6",
                 "--n-test-per-class", "3", "--epochs", "2", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "| vanilla |" in out and "| facemixup |" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["methods"]["vanilla"]["final"]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "facemixup", "count", "--n", "2"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "126"
    r = subprocess.run([sys.executable, "-m", "facemixup", "synth"], capture_output=True, text=True)
    assert r.returncode == 2
