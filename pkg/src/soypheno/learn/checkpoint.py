"""Versioned binary model checkpoints with an embedded JSON header.

Layout: 8-byte magic, uint32 header length, UTF-8 JSON header, then the
raw little-endian parameter arrays in the order the header lists them.
Writing the same model twice produces identical bytes.
"""

import json
import struct

import numpy as np

from .network import PARAM_ORDER, ContourNet
from .train import SUPER_GROUPS, HierarchicalModel

MAGIC = b"SPCKPT01"
FORMAT_VERSION = 1


def _net_entry(prefix, net):
    arrays = []
    for name in PARAM_ORDER:
        arr = net.params[name]
        arrays.append({
            "name": f"{prefix}{name}",
            "shape": list(arr.shape),
            "dtype": arr.dtype.name,
        })
    return arrays


def save_checkpoint(path, model, seed, hyperparams):
    """Write a flat ContourNet or HierarchicalModel to disk."""
    if isinstance(model, HierarchicalModel):
        kind = "hierarchical"
        nets = [("stage1/", model.stage1)]
        nets += [(f"stage2_group{gi}/", net) for gi, net in sorted(model.stage2.items())]
        architecture = {
            "stage1": model.stage1.architecture(),
            "stage2": {str(gi): net.architecture() for gi, net in sorted(model.stage2.items())},
        }
    else:
        kind = "flat"
        nets = [("", model)]
        architecture = model.architecture()

    arrays = []
    for prefix, net in nets:
        arrays.extend(_net_entry(prefix, net))
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "architecture": architecture,
        "seed": seed,
        "hyperparams": hyperparams,
        "arrays": arrays,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for prefix, net in nets:
            for name in PARAM_ORDER:
                fh.write(np.ascontiguousarray(net.params[name]).astype(
                    net.params[name].dtype.newbyteorder("<"), copy=False).tobytes())


def _rebuild_net(arch):
    return ContourNet(
        n_classes=arch["n_classes"],
        input_shape=tuple(arch["input_shape"]),
        conv_channels=tuple(arch["conv_channels"]),
        hidden_units=arch["hidden_units"],
        seed=arch["seed"],
        dtype=np.dtype(arch["dtype"]),
        input_gain=arch.get("input_gain", 1.0),
    )


def load_checkpoint(path):
    """Returns (model, header)."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['format_version']}")
        blobs = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"]).newbyteorder("<")
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            data = fh.read(count * dtype.itemsize)
            blobs[entry["name"]] = np.frombuffer(data, dtype=dtype).reshape(entry["shape"]).astype(entry["dtype"])

    if header["kind"] == "flat":
        net = _rebuild_net(header["architecture"])
        net.set_params({name: blobs[name] for name in PARAM_ORDER})
        return net, header

    stage1 = _rebuild_net(header["architecture"]["stage1"])
    stage1.set_params({name: blobs[f"stage1/{name}"] for name in PARAM_ORDER})
    stage2 = {}
    for gi_str, arch in header["architecture"]["stage2"].items():
        gi = int(gi_str)
        net = _rebuild_net(arch)
        net.set_params({name: blobs[f"stage2_group{gi}/{name}"] for name in PARAM_ORDER})
        stage2[gi] = net
    model = HierarchicalModel(stage1, stage2)
    if set(stage2) != {gi for gi, m in enumerate(SUPER_GROUPS, start=1) if len(m) > 1}:
        raise ValueError("checkpoint is missing stage-2 classifiers")
    return model, header
