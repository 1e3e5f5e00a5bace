import csv
import json

import numpy as np
import pytest

from dwl import io
from dwl.cli import HISTORY_HEADER, SWEEP_HEADER, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def last_json(out):
    return json.loads([ln for ln in out.splitlines() if ln.startswith("{")][-1])


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


SMALL = {"data": {"generator": "blobs", "k": 3, "dim": 5, "n_per_class": 40, "spread": 1.0,
                  "distractor_dims": 5, "distractor_std": 1.0},
         "train": {"max_epochs": 30}}


@pytest.fixture
def blobs_dir(tmp_path, capsys):
    code, _ = run(capsys, "gen-data", "blobs", "--out", tmp_path / "blobs", "--seed", 1,
                  "--n", 100)
    assert code == 0
    return tmp_path / "blobs"


@pytest.fixture
def trained(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "run"
    code, _ = run(capsys, "train", "--config", cfg, "--out", out, "--seed", 0)
    assert code == 0
    return out


def test_gen_data_shape_and_determinism(tmp_path, capsys, blobs_dir):
    labels = (blobs_dir / "labels.csv").read_text().splitlines()
    assert len(labels) == 301
    with open(blobs_dir / "data.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 301 and len(rows[0]) == 5
    run(capsys, "gen-data", "blobs", "--out", tmp_path / "again", "--seed", 1, "--n", 100)
    for name in ("data.csv", "labels.csv"):
        assert (blobs_dir / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_gen_data_bars_binary(tmp_path, capsys):
    code, _ = run(capsys, "gen-data", "bars", "--out", tmp_path / "b", "--seed", 0, "--n", 10,
                  "--size", 6)
    assert code == 0
    assert io.read_matrix(tmp_path / "b" / "data.dwlm").shape == (20, 36)


def test_missing_required_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["gen-data", "blobs", "--out", "x"])
    assert err.value.code == 2
    assert "--seed" in capsys.readouterr().err


def test_bdr_fit_prunes_and_is_deterministic(tmp_path, capsys):
    run(capsys, "gen-data", "lowrank", "--out", tmp_path / "lr", "--seed", 3, "--n", 200,
        "--d", 12, "--rank", 2, "--noise", 0.01)
    code, out = run(capsys, "bdr-fit", "--data", tmp_path / "lr", "--out", tmp_path / "m1",
                    "--prior", "ard", "--r", 6, "--max-iter", 500)
    assert code == 0
    rec = last_json(out.out)
    assert 1 <= rec["retained"] <= 6
    run(capsys, "bdr-fit", "--data", tmp_path / "lr", "--out", tmp_path / "m2",
        "--prior", "ard", "--r", 6, "--max-iter", 500)
    for f in sorted(p.name for p in (tmp_path / "m1").iterdir()):
        assert (tmp_path / "m1" / f).read_bytes() == (tmp_path / "m2" / f).read_bytes()


def test_bdr_fit_bad_r(tmp_path, capsys, blobs_dir):
    code, out = run(capsys, "bdr-fit", "--data", blobs_dir, "--out", tmp_path / "m", "--r", 0)
    assert code == 2
    assert "error" in out.err


def test_train_outputs(trained):
    with open(trained / "history.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == HISTORY_HEADER
    summary = json.loads((trained / "summary.json").read_text())
    assert len(rows) - 1 == summary["epochs_run"]
    assert summary["ld_width"] >= 1
    for name in ("config.json", "metrics.json", "test.csv", "model/manifest.json"):
        assert (trained / name).exists()


def test_train_single_channel(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    code, out = run(capsys, "train", "--config", cfg, "--out", tmp_path / "s", "--channel",
                    "single")
    assert code == 0
    assert json.loads(out.out.splitlines()[0])["ld_width"] == 0
    code, _ = run(capsys, "train", "--config", cfg, "--out", tmp_path / "s2", "--channel",
                  "single", "--ld", "bdr")
    assert code == 2


def test_train_deterministic(tmp_path, capsys, trained):
    cfg = write_config(tmp_path, SMALL)
    run(capsys, "train", "--config", cfg, "--out", tmp_path / "again", "--seed", 0)
    for name in ("history.csv", "metrics.json", "model/fusion_W.dwlm"):
        assert (trained / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_eval_reproduces_training_metrics(tmp_path, capsys, trained):
    code, _ = run(capsys, "eval", "--model", trained / "model", "--data", trained / "test.csv",
                  "--out", tmp_path / "ev")
    assert code == 0
    assert (tmp_path / "ev" / "metrics.json").read_text() == (trained / "metrics.json").read_text()


def test_eval_shape_mismatch(tmp_path, capsys, trained):
    run(capsys, "gen-data", "blobs", "--out", tmp_path / "other", "--seed", 0, "--n", 10,
        "--dim", 3)
    code, _ = run(capsys, "eval", "--model", trained / "model", "--data", tmp_path / "other")
    assert code == 2


def test_eval_missing_model(tmp_path, capsys, blobs_dir):
    code, _ = run(capsys, "eval", "--model", tmp_path / "nope", "--data", blobs_dir)
    assert code == 3


def test_export_features(tmp_path, capsys, trained):
    code, _ = run(capsys, "export-features", "--model", trained / "model", "--data",
                  trained / "test.csv", "--layer", "pre_head", "--out", tmp_path / "f")
    assert code == 0
    feats = io.read_matrix(tmp_path / "f" / "features.dwlm")
    assert feats.shape[1] == 16
    with open(tmp_path / "f" / "features.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert np.array_equal(np.array(rows, dtype=float), feats)


def test_sweep_single_r(tmp_path, capsys):
    cfg = write_config(tmp_path, dict(SMALL, train={"max_epochs": 10}))
    code, _ = run(capsys, "sweep-components", "--config", cfg, "--out", tmp_path / "sw",
                  "--r-values", "2", "--ld", "pca")
    assert code == 0
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SWEEP_HEADER
    assert [r[1] for r in rows[1:]] == ["0", "median"]


def test_unknown_config_key(tmp_path, capsys):
    cfg = write_config(tmp_path, {"trian": {}})
    code, out = run(capsys, "train", "--config", cfg, "--out", tmp_path / "x")
    assert code == 2
    assert "trian" in out.err


def test_missing_config_file(tmp_path, capsys):
    code, _ = run(capsys, "train", "--config", tmp_path / "missing.json", "--out", tmp_path / "x")
    assert code == 3


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "dwl", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("gen-data", "bdr-fit", "train", "eval", "sweep-components", "export-features"):
        assert sub in res.stdout
