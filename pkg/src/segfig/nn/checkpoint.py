"""Binary checkpoint container.

Layout: magic bytes ``SPCK``, little-endian u32 format version, u32
manifest length, a UTF-8 JSON manifest listing (name, shape, dtype, byte
offset) per tensor plus free-form metadata, then the raw tensor blobs.
Floating tensors are stored as little-endian 32-bit floats; integer
side-data (batch-norm counters, optimizer step counts) as little-endian
64-bit ints with the dtype recorded in the manifest.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

MAGIC = b"SPCK"
VERSION = 1

_DTYPES = {"f4": np.dtype("<f4"), "i8": np.dtype("<i8")}


class CheckpointError(RuntimeError):
    pass


def _to_numpy(t: torch.Tensor) -> tuple:
    arr = t.detach().cpu().numpy()
    if np.issubdtype(arr.dtype, np.floating):
        return arr.astype("<f4"), "f4"
    return arr.astype("<i8"), "i8"


def _gather_optimizer_tensors(optimizer) -> dict:
    tensors = {}
    sd = optimizer.state_dict()
    for idx, state in sd["state"].items():
        for key, val in state.items():
            if isinstance(val, torch.Tensor):
                tensors[f"opt/{idx}/{key}"] = val
            else:
                tensors[f"opt/{idx}/{key}"] = torch.tensor(float(val))
    return tensors


def save_checkpoint(path, model: torch.nn.Module, meta: dict | None = None,
                    optimizer=None) -> None:
    tensors = {f"model/{k}": v for k, v in model.state_dict().items()}
    meta = dict(meta or {})
    if optimizer is not None:
        tensors.update(_gather_optimizer_tensors(optimizer))
        meta["optimizer_param_groups"] = [
            {k: v for k, v in g.items() if k != "params"}
            for g in optimizer.state_dict()["param_groups"]
        ]
    entries = []
    blobs = []
    offset = 0
    for name, t in tensors.items():
        arr, dtype = _to_numpy(t)
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": dtype, "offset": offset})
        raw = arr.tobytes()
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({"tensors": entries, "meta": meta},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for raw in blobs:
            fh.write(raw)


def read_container(path) -> tuple:
    """Parse a checkpoint into ({name: ndarray}, meta)."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise CheckpointError(f"{path}: truncated header at offset {len(data)}")
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic at offset 0")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version} at offset 4")
    (mlen,) = struct.unpack_from("<I", data, 8)
    if 12 + mlen > len(data):
        raise CheckpointError(f"{path}: manifest overruns file at offset 12")
    try:
        manifest = json.loads(data[12:12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest at offset 12: {exc}")
    blob = data[12 + mlen:]
    tensors = {}
    for e in manifest["tensors"]:
        dt = _DTYPES[e["dtype"]]
        n = int(np.prod(e["shape"], dtype=np.int64)) if e["shape"] else 1
        start = e["offset"]
        end = start + n * dt.itemsize
        if end > len(blob):
            raise CheckpointError(
                f"{path}: tensor {e['name']} overruns blob at offset {12 + mlen + start}")
        tensors[e["name"]] = np.frombuffer(
            blob[start:end], dtype=dt).reshape(e["shape"]).copy()
    return tensors, manifest.get("meta", {})


def load_checkpoint(path, model: torch.nn.Module, optimizer=None) -> dict:
    """Restore model (and optionally optimizer) state; returns metadata."""
    tensors, meta = read_container(path)
    state = {}
    for key, ref in model.state_dict().items():
        name = f"model/{key}"
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name}")
        state[key] = torch.as_tensor(tensors[name]).to(ref.dtype).reshape(ref.shape)
    model.load_state_dict(state)
    if optimizer is not None and "optimizer_param_groups" in meta:
        opt_state = {}
        for name, arr in tensors.items():
            if not name.startswith("opt/"):
                continue
            _, idx, key = name.split("/", 2)
            entry = opt_state.setdefault(int(idx), {})
            t = torch.as_tensor(arr)
            entry[key] = t.float() if t.dtype == torch.float32 else t
        sd = optimizer.state_dict()
        for group, saved in zip(sd["param_groups"], meta["optimizer_param_groups"]):
            group.update(saved)
        sd["state"] = opt_state
        optimizer.load_state_dict(sd)
    return meta
