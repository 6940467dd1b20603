"""Flat binary checkpoint format.

Layout (all integers little-endian uint32 unless noted)::

    magic  b"GAPM"
    version
    spec digest          32 bytes, sha256 of the canonical spec JSON
    layer count L
    per layer: array count A, then per array: name length, name (ascii),
               ndim, dims...
    payload              little-endian float64, layers in order, arrays in
                         the order listed in the header
"""

import struct

import numpy as np

from .network import ModelParams

MAGIC = b"GAPM"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(spec, params):
    head = [MAGIC, struct.pack("<I", VERSION), spec.digest(), struct.pack("<I", len(params))]
    payload = []
    for p in params:
        names = sorted(p)
        head.append(struct.pack("<I", len(names)))
        for name in names:
            arr = np.ascontiguousarray(p[name], dtype="<f8")
            enc = name.encode("ascii")
            head.append(struct.pack("<I", len(enc)) + enc)
            head.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
            payload.append(arr.tobytes())
    return b"".join(head + payload)


def loads(spec, blob):
    """Parse a checkpoint, refusing one written for a different spec."""
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = bytes(view[pos : pos + n])
        pos += n
        return chunk

    def u32():
        return struct.unpack("<I", take(4))[0]

    if take(4) != MAGIC:
        raise CheckpointError("not a gapriv checkpoint")
    if u32() != VERSION:
        raise CheckpointError("unsupported checkpoint version")
    if take(32) != spec.digest():
        raise CheckpointError("checkpoint was written for a different network spec")
    n_layers = u32()
    layout = []
    for _ in range(n_layers):
        arrays = []
        for _ in range(u32()):
            name = take(u32()).decode("ascii")
            ndim = u32()
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim)) if ndim else ()
            arrays.append((name, shape))
        layout.append(arrays)
    layers = []
    for arrays in layout:
        p = {}
        for name, shape in arrays:
            count = int(np.prod(shape)) if shape else 1
            p[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
        layers.append(p)
    if pos != len(view):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return ModelParams(layers)


def save(path, spec, params):
    with open(path, "wb") as fh:
        fh.write(dumps(spec, params))


def load(path, spec):
    with open(path, "rb") as fh:
        return loads(spec, fh.read())
