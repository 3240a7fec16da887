"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    b"SCTL" | version u32 | count u32
    repeated count times:
        name_len u32 | name utf-8 | rank u32 | dims u64 * rank | float32 payload
"""
import struct

import numpy as np

MAGIC = b"SCTL"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_arrays(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not an SCTL checkpoint")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}Q", blob, pos)
        pos += 8 * rank
        n = int(np.prod(dims)) if rank else 1
        out[name] = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(dims).copy()
        pos += 4 * n
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return out


def check_compatible(expected, loaded):
    """Raise listing every array whose presence or shape disagrees."""
    problems = []
    for name, arr in expected.items():
        if name not in loaded:
            problems.append(f"{name}: missing")
        elif loaded[name].shape != arr.shape:
            problems.append(f"{name}: checkpoint {loaded[name].shape} vs model {arr.shape}")
    problems += [f"{name}: unexpected" for name in loaded if name not in expected]
    if problems:
        raise CheckpointError("checkpoint does not match config:\n  " + "\n  ".join(problems))
