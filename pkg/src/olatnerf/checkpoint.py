"""Binary checkpoint format: JSON header plus raw little-endian float32 blobs.

Layout: 8-byte magic, uint32 header length, UTF-8 JSON header, then every
array (parameters first, then Adam first/second moments when present) as
contiguous little-endian float32 bytes in header order.  The header records
the full model configuration and training config so a checkpoint reloads
into an identical model.  The byte stream is fully deterministic for a given
model state, which makes bitwise reproducibility testable.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .models import RelightModel
from .nets import AdamState, init_adam

MAGIC = b"OLNF0001"
_F32 = np.dtype("<f4")


def save_checkpoint(
    path,
    model: RelightModel,
    adam: AdamState | None = None,
    optimizer_state: tuple | None = None,
    optimizer_step: int = 0,
    train_config: dict | None = None,
    meta: dict | None = None,
) -> Path:
    """Serialize model parameters (and optionally optimizer moments).

    ``optimizer_state`` is an (m_list, v_list) pair overriding the moments
    taken from ``adam``; used to persist the state snapshotted at the best
    validation epoch.
    """
    params = model.parameters()
    names = model.parameter_names()
    arrays = list(zip(names, params))
    step = optimizer_step
    if optimizer_state is not None:
        m_list, v_list = optimizer_state
    elif adam is not None:
        m_list, v_list = adam.m, adam.v
        step = adam.step
    else:
        m_list = v_list = None
    if m_list is not None:
        arrays += [(f"adam_m.{n}", a) for n, a in zip(names, m_list)]
        arrays += [(f"adam_v.{n}", a) for n, a in zip(names, v_list)]

    header = {
        "model": model.config_dict(),
        "train_config": train_config,
        "optimizer_step": step,
        "has_optimizer": m_list is not None,
        "meta": meta or {},
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_F32).tobytes())
    return path


def load_checkpoint(path):
    """Rebuild (model, adam_or_None, header) from a checkpoint file."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays = []
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise ValueError(f"{path} is truncated at array {entry['name']}")
            arrays.append(np.frombuffer(buf, dtype=_F32).reshape(shape).copy())

    model = RelightModel.from_config(header["model"])
    n_params = len(model.parameters())
    model.set_parameters(arrays[:n_params])
    adam = None
    if header.get("has_optimizer"):
        tc = header.get("train_config") or {}
        adam = init_adam(
            model.parameters(),
            lr=tc.get("lr", 0.01),
            beta1=tc.get("beta1", 0.9),
            beta2=tc.get("beta2", 0.999),
            eps=tc.get("adam_eps", 1e-8),
        )
        adam.step = header.get("optimizer_step", 0)
        for dst, src in zip(adam.m, arrays[n_params : 2 * n_params]):
            dst[...] = src
        for dst, src in zip(adam.v, arrays[2 * n_params : 3 * n_params]):
            dst[...] = src
    return model, adam, header
