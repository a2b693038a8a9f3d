"""Binary serialization of trained models.

Layout, all little-endian: 8-byte magic, uint16 version, uint8
formulation tag, uint32 K, uint32 D, K*D float64 weights row-major,
uint32 N, N float64 u values.  The u vector rides along so a run can be
resumed or inspected; evaluation only needs W.
"""

import struct

import numpy as np

from .errors import DataFormatError
from .objective import FORMULATIONS, ModelState

MAGIC = b"BSMXMODL"
VERSION = 1
_HEADER = struct.Struct("<8sHBII")


def save_model(path, state: ModelState) -> None:
    form = FORMULATIONS.index(state.formulation)
    k, d = state.W.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, form, k, d))
        fh.write(np.ascontiguousarray(state.W, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", len(state.u)))
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())


def load_model(path) -> ModelState:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataFormatError(f"model file too short: {len(blob)} bytes")
    magic, version, form, k, d = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DataFormatError(f"unsupported model version {version}")
    if form >= len(FORMULATIONS):
        raise DataFormatError(f"unknown formulation tag {form}")
    off = _HEADER.size
    need = k * d * 8
    if len(blob) < off + need + 4:
        raise DataFormatError("model file truncated in the weight block")
    W = np.frombuffer(blob, dtype="<f8", count=k * d, offset=off) \
        .reshape(k, d).astype(np.float64)
    off += need
    (n,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) != off + n * 8:
        raise DataFormatError(
            f"model file length {len(blob)} does not match header "
            f"(expected {off + n * 8})")
    u = np.frombuffer(blob, dtype="<f8", count=n, offset=off) \
        .astype(np.float64)
    return ModelState(W=W, u=u, formulation=FORMULATIONS[form])
