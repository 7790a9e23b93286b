"""Binary checkpoint serialization.

File layout:

    bytes 0..7    magic "HGCKPT01"
    bytes 8..15   little-endian uint64 length of the JSON header
    header        UTF-8 JSON: {"version", "layers", "shapes", "meta"}
    blobs         raw little-endian IEEE-754 float32, one blob per
                  parameter tensor (weights then bias, layer order)

The header JSON is serialized canonically (sorted keys, no whitespace),
so save -> load -> save reproduces a byte-identical file. Parameters are
stored as float32; loading them back gives the float64 engine values
rounded once to 32-bit.
"""

import json
import struct

import numpy as np

from .network import LayerSpec, Network

MAGIC = b"HGCKPT01"
VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint file problems."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class TruncatedError(CheckpointError):
    pass


def _param_blobs(net):
    for i in net.parameterized_indices():
        yield net.params[i]["w"]
        yield net.params[i]["b"]


def save_checkpoint(net, path):
    """Write the network's specs, parameters and metadata to `path`."""
    header = {
        "version": VERSION,
        "layers": [spec.to_dict() for spec in net.specs],
        "shapes": [list(b.shape) for b in _param_blobs(net)],
        "meta": {
            "input_shape": list(net.input_shape),
            "trainable": [bool(t) for t in net.trainable],
            **net.meta,
        },
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in _param_blobs(net):
            f.write(np.ascontiguousarray(blob, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Rebuild a Network from a checkpoint file.

    Raises BadMagicError / VersionMismatchError / ShapeMismatchError /
    TruncatedError depending on what is wrong with the file.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(MAGIC) + 8:
        raise TruncatedError(f"file is only {len(data)} bytes")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"bad magic {data[:len(MAGIC)]!r}")
    (header_len,) = struct.unpack("<Q", data[len(MAGIC) : len(MAGIC) + 8])
    header_start = len(MAGIC) + 8
    if len(data) < header_start + header_len:
        raise TruncatedError("header extends past end of file")
    try:
        header = json.loads(data[header_start : header_start + header_len].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"unparseable header: {e}") from None
    if header.get("version") != VERSION:
        raise VersionMismatchError(
            f"unsupported version {header.get('version')!r}, want {VERSION}"
        )
    try:
        specs = [LayerSpec.from_dict(d) for d in header["layers"]]
        shapes = [tuple(s) for s in header["shapes"]]
        meta = dict(header["meta"])
        input_shape = tuple(meta.pop("input_shape"))
        trainable = list(meta.pop("trainable"))
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed header: {e}") from None

    net = Network(specs, input_shape, meta=meta, init="zeros")
    expected = [b.shape for b in _param_blobs(net)]
    if [tuple(s) for s in expected] != shapes:
        raise ShapeMismatchError(
            f"header shapes {shapes} do not match layer specs {expected}"
        )
    if len(trainable) != len(specs):
        raise CheckpointError("trainable flags do not cover every layer")
    net.trainable = [bool(t) for t in trainable]

    pos = header_start + header_len
    total = sum(int(np.prod(s)) * 4 for s in shapes)
    if len(data) - pos < total:
        raise TruncatedError(
            f"parameter blobs truncated: need {total} bytes, have {len(data) - pos}"
        )
    if len(data) - pos > total:
        raise ShapeMismatchError(
            f"{len(data) - pos - total} trailing bytes after parameter blobs"
        )
    for i in net.parameterized_indices():
        for key in ("w", "b"):
            shape = net.params[i][key].shape
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
            net.params[i][key] = arr.astype(np.float64).reshape(shape)
            pos += count * 4
    return net
