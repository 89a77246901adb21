import json
import os
import stat

import numpy as np
import pytest

from segfig.cli import main
from segfig.dataset_io import FigureDataset


def run(args):
    return main(list(args))


@pytest.fixture(scope="module")
def forged(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "set"
    code = run(["forge", "--out", str(out), "--count", "30", "--seed", "1"])
    assert code == 0
    return out


def test_forge_writes_expected_files(forged):
    manifest = json.loads((forged / "manifest.json").read_text())
    assert manifest["count"] == 30
    assert manifest["resolution"] == 64
    files = sorted(p.name for p in forged.iterdir())
    assert "0000_label.png" in files
    assert "0029_rgb.png" in files
    assert "0029_sil.png" in files
    assert len([f for f in files if f.endswith(".png")]) == 90


def test_forge_rerun_is_byte_identical(forged, tmp_path):
    other = tmp_path / "again"
    assert run(["forge", "--out", str(other), "--count", "30",
                "--seed", "1"]) == 0
    for name in ("0000_label.png", "0007_rgb.png", "0029_sil.png",
                 "manifest.json"):
        assert (forged / name).read_bytes() == (other / name).read_bytes()


def test_forge_dataset_is_loadable(forged):
    ds = FigureDataset(forged)
    assert len(ds) == 30
    lab = ds.label(0)
    assert lab.shape == (64, 64)
    assert lab.max() < 10
    rgb = ds.rgb(0)
    assert rgb.shape == (64, 64, 3)
    assert 0.0 <= rgb.min() and rgb.max() <= 1.0


def test_forge_unwritable_path_exits_2(tmp_path):
    blocked = tmp_path / "blocked"
    blocked.mkdir()
    os.chmod(blocked, stat.S_IRUSR | stat.S_IXUSR)
    try:
        code = run(["forge", "--out", str(blocked / "x"), "--count", "1"])
    finally:
        os.chmod(blocked, stat.S_IRWXU)
    if os.getuid() == 0:
        pytest.skip("permission bits are not enforced for root")
    assert code == 2


def test_unknown_config_key_exits_1(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("count: 5\nnot_a_real_key: 3\n")
    code = run(["forge", "--out", str(tmp_path / "d"), "--config", str(cfg)])
    assert code == 1


def test_bad_subcommand_exits_1():
    assert run(["no-such-command"]) == 1


def test_missing_required_option_exits_1():
    assert run(["forge"]) == 1


def test_walk_rejects_even_steps(tmp_path, forged):
    code = run(["walk", "--checkpoint", str(tmp_path / "absent.spck"),
                "--data", str(forged), "--out", str(tmp_path / "w"),
                "--steps", "4"])
    assert code == 1


def test_corrupt_checkpoint_exits_2(tmp_path, forged):
    bad = tmp_path / "bad.spck"
    bad.write_bytes(b"JUNKJUNKJUNKJUNK")
    code = run(["walk", "--checkpoint", str(bad), "--data", str(forged),
                "--out", str(tmp_path / "w"), "--steps", "3"])
    assert code == 2


def test_missing_checkpoint_exits_2(tmp_path, forged):
    code = run(["eval", "--mode", "recon", "--data", str(forged),
                "--out", str(tmp_path / "e"),
                "--checkpoint", str(tmp_path / "absent.spck")])
    assert code == 2


@pytest.fixture(scope="module")
def trained_vae(tmp_path_factory, forged):
    out = tmp_path_factory.mktemp("vae")
    code = run(["train", "vae", "--data", str(forged), "--out", str(out),
                "--epochs", "1", "--seed", "0"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained_portray(tmp_path_factory, forged):
    out = tmp_path_factory.mktemp("portray")
    code = run(["train", "portray", "--data", str(forged), "--out", str(out),
                "--epochs", "1", "--seed", "0"])
    assert code == 0
    return out


def test_train_writes_checkpoints_and_log(trained_vae):
    assert (trained_vae / "last.spck").exists()
    assert (trained_vae / "best.spck").exists()
    lines = (trained_vae / "train.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert rec["epoch"] == 1
    assert "val_accuracy" in rec and "recon_nll" in rec


def test_sample_unconditional(trained_vae, trained_portray, tmp_path):
    out = tmp_path / "samples"
    code = run(["sample", "--mode", "unconditional", "--out", str(out),
                "--vae", str(trained_vae / "last.spck"),
                "--portray", str(trained_portray / "last.spck"),
                "-n", "2", "--seed", "3"])
    assert code == 0
    pngs = sorted(p.name for p in out.iterdir() if p.suffix == ".png")
    assert "0000_sketch.png" in pngs and "0001_rgb.png" in pngs


def test_walk_outputs_frames_and_sheet(trained_vae, forged, tmp_path):
    out = tmp_path / "walk"
    code = run(["walk", "--checkpoint", str(trained_vae / "last.spck"),
                "--data", str(forged), "--out", str(out), "--steps", "5"])
    assert code == 0
    frames = [p for p in out.iterdir() if "frame" in p.name]
    assert len(frames) == 5
    assert (out / "contact_sheet.png").exists()


def test_eval_recon_deterministic(trained_vae, forged, tmp_path):
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    for out in (out1, out2):
        code = run(["eval", "--mode", "recon", "--data", str(forged),
                    "--out", str(out),
                    "--checkpoint", str(trained_vae / "last.spck")])
        assert code == 0
    a = (out1 / "recon_metrics.json").read_bytes()
    b = (out2 / "recon_metrics.json").read_bytes()
    assert a == b
    report = json.loads(a)
    assert "pixel_accuracy" in report
    assert (out1 / "recon_metrics.txt").read_text().strip()
