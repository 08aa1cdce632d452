"""Read and write EDC3 belief tensors and label maps from NumPy.

    import edc3
    edc3.write_tensor("image_0000_c0.edc3", softmax)   # (H, W, M) float
    edc3.write_labels("labels_0000.edc3", gt)          # (H, W) integers, 65535 = ignore
"""

import struct

import numpy as np

MAGIC = b"EDC3"
VERSION = 1
TENSOR = 1
LABELS = 2


def _header(kind, dims):
    return MAGIC + struct.pack("<BB", VERSION, kind) + struct.pack("<%dI" % len(dims), *dims)


def write_tensor(path, scores):
    a = np.ascontiguousarray(scores, dtype="<f4")
    if a.ndim != 3:
        raise ValueError("tensor must be (H, W, M)")
    with open(path, "wb") as f:
        f.write(_header(TENSOR, a.shape) + a.tobytes())


def write_labels(path, labels):
    a = np.ascontiguousarray(labels, dtype="<u2")
    if a.ndim != 2:
        raise ValueError("label map must be (H, W)")
    with open(path, "wb") as f:
        f.write(_header(LABELS, a.shape) + a.tobytes())


def read(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError("%s: bad magic" % path)
    version, kind = data[4], data[5]
    if version != VERSION:
        raise ValueError("%s: unsupported version %d" % (path, version))
    if kind == TENSOR:
        h, w, m = struct.unpack_from("<3I", data, 6)
        return np.frombuffer(data, dtype="<f4", offset=18).reshape(h, w, m)
    if kind == LABELS:
        h, w = struct.unpack_from("<2I", data, 6)
        return np.frombuffer(data, dtype="<u2", offset=14).reshape(h, w)
    raise ValueError("%s: unknown kind %d" % (path, kind))
