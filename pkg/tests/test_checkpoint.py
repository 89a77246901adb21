import json
import struct

import pytest
import torch

from segfig.nn.blocks import make_optimizer
from segfig.nn.checkpoint import (CheckpointError, load_checkpoint,
                                  read_container, save_checkpoint)


def small_model(seed=0):
    torch.manual_seed(seed)
    return torch.nn.Sequential(torch.nn.Linear(4, 8), torch.nn.LeakyReLU(0.2),
                               torch.nn.Linear(8, 2))


def test_roundtrip_restores_weights(tmp_path):
    m = small_model(0)
    path = tmp_path / "m.spck"
    save_checkpoint(path, m, {"epoch": 3})
    m2 = small_model(1)
    assert not torch.equal(m2[0].weight, m[0].weight)
    meta = load_checkpoint(path, m2)
    assert meta["epoch"] == 3
    for a, b in zip(m.state_dict().values(), m2.state_dict().values()):
        assert torch.equal(a, b)


def test_header_layout(tmp_path):
    path = tmp_path / "m.spck"
    save_checkpoint(path, small_model(), {})
    raw = path.read_bytes()
    assert raw[:4] == b"SPCK"
    assert struct.unpack("<I", raw[4:8])[0] == 1
    mlen = struct.unpack("<I", raw[8:12])[0]
    manifest = json.loads(raw[12:12 + mlen])
    names = {e["name"] for e in manifest["tensors"]}
    assert "model/0.weight" in names


def test_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "m.spck"
    save_checkpoint(path, small_model(), {})
    raw = bytearray(path.read_bytes())
    raw[:4] = b"JUNK"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="offset 0"):
        read_container(path)


def test_bad_version_reports_offset(tmp_path):
    path = tmp_path / "m.spck"
    save_checkpoint(path, small_model(), {})
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="offset 4"):
        read_container(path)


def test_truncated_payload_is_detected(tmp_path):
    path = tmp_path / "m.spck"
    save_checkpoint(path, small_model(), {})
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        read_container(path)


def test_corrupt_manifest_is_detected(tmp_path):
    path = tmp_path / "m.spck"
    save_checkpoint(path, small_model(), {})
    raw = bytearray(path.read_bytes())
    raw[14] = 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        read_container(path)


def test_optimizer_state_roundtrip(tmp_path):
    m = small_model(0)
    opt = make_optimizer(m.parameters())
    x = torch.randn(8, 4)
    for _ in range(3):
        loss = m(x).pow(2).sum()
        opt.zero_grad()
        loss.backward()
        opt.step()
    path = tmp_path / "m.spck"
    save_checkpoint(path, m, {"epoch": 1}, optimizer=opt)

    m2 = small_model(1)
    opt2 = make_optimizer(m2.parameters())
    load_checkpoint(path, m2, optimizer=opt2)
    sd1, sd2 = opt.state_dict(), opt2.state_dict()
    for (k1, s1), (k2, s2) in zip(sorted(sd1["state"].items()),
                                  sorted(sd2["state"].items())):
        assert s1["step"] == s2["step"]
        assert torch.allclose(s1["exp_avg"], s2["exp_avg"], atol=1e-6)
        assert torch.allclose(s1["exp_avg_sq"], s2["exp_avg_sq"], atol=1e-6)


def test_resume_is_a_fixed_point(tmp_path):
    """Save -> load -> save again produces byte-identical files."""
    m = small_model(0)
    opt = make_optimizer(m.parameters())
    loss = m(torch.randn(4, 4)).sum()
    opt.zero_grad()
    loss.backward()
    opt.step()
    p1 = tmp_path / "a.spck"
    p2 = tmp_path / "b.spck"
    save_checkpoint(p1, m, {"epoch": 1}, optimizer=opt)
    m2 = small_model(1)
    opt2 = make_optimizer(m2.parameters())
    load_checkpoint(p1, m2, optimizer=opt2)
    save_checkpoint(p2, m2, {"epoch": 1}, optimizer=opt2)
    assert p1.read_bytes() == p2.read_bytes()


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_container(tmp_path / "nope.spck")
