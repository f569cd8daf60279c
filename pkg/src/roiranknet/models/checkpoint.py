"""Binary model checkpoints.

Layout::

    b"ROIRANKNET1\n"
    uint32 little-endian header length
    UTF-8 JSON header: config, seed, roi_order, and an ordered list of arrays
        (name, kind, shape) where kind is "param" or "bn_mean"/"bn_var"
    concatenated little-endian float64 array data, in header order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .config import ModelConfig
from .network import Model, build_model

MAGIC = b"ROIRANKNET1\n"
_LE_F8 = np.dtype("<f8")


def save_checkpoint(model: Model, path, roi_order=None) -> Path:
    path = Path(path)
    arrays = []
    entries = []
    for name, p in model.params.items():
        entries.append({"name": name, "kind": "param", "shape": list(p.shape)})
        arrays.append(p.data)
    for name, state in model.bn.items():
        entries.append({"name": name, "kind": "bn_mean", "shape": list(state.running_mean.shape)})
        arrays.append(state.running_mean)
        entries.append({"name": name, "kind": "bn_var", "shape": list(state.running_var.shape)})
        arrays.append(state.running_var)
    header = {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "roi_order": None if roi_order is None else [int(r) for r in roi_order],
        "arrays": entries,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_LE_F8).tobytes())
    return path


def load_checkpoint(path) -> tuple[Model, dict]:
    """Return the restored model and the decoded header."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a ROIRANKNET1 checkpoint")
    pos = len(MAGIC)
    try:
        (n,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        header = json.loads(raw[pos:pos + n].decode("utf-8"))
        pos += n
        config = ModelConfig.from_dict(header["config"])
    except (struct.error, ValueError, KeyError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc

    model = build_model(config, 0)
    model.seed = header.get("seed")
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if pos + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated data for {entry['name']}")
        data = np.frombuffer(raw, dtype=_LE_F8, count=count, offset=pos).astype(np.float64)
        data = data.reshape(shape)
        pos += nbytes
        name, kind = entry["name"], entry["kind"]
        try:
            if kind == "param":
                target = model.params[name]
                if target.shape != shape:
                    raise CheckpointError(f"{path}: shape mismatch for {name}")
                target.data = data
            elif kind == "bn_mean":
                model.bn[name].running_mean = data
            elif kind == "bn_var":
                model.bn[name].running_var = data
            else:
                raise CheckpointError(f"{path}: unknown array kind {kind!r}")
        except KeyError as exc:
            raise CheckpointError(f"{path}: unexpected array {name!r}") from exc
    if pos != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after array data")
    return model, header
