"""Binary persistence for reduced models.

Container layout (all integers little-endian):

    magic "PRBM" | u32 version
    u32 name length | utf-8 problem name
    u32 rhs-mode length | utf-8 rhs mode
    f64 epsilon | f64 eta | u64 fine dimension
    then named arrays, each:
        u32 tag length | utf-8 tag
        u8 dtype code (0 = f8, 1 = i8) | u8 present flag
        u32 ndim | u64 dims... | raw little-endian data (C order)

Matrices are stored as IEEE-754 doubles, so a save/load/save round trip is
byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .offline import ReducedModel

__all__ = ["save_model", "load_model", "ModelFormatError"]

MAGIC = b"PRBM"
VERSION = 1

_DTYPES = {0: "<f8", 1: "<i8"}
_CODES = {np.dtype("float64"): 0, np.dtype("int64"): 1}

_ARRAY_FIELDS = [
    "skeleton_indices",
    "additional_indices",
    "basis",
    "singular_values",
    "mixing",
    "projected_operators",
    "projected_offset",
    "projected_rhs",
    "operator_plan_columns",
]


class ModelFormatError(ValueError):
    """Corrupt or incompatible model file."""


def _write_str(fh, text: str) -> None:
    raw = text.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (length,) = struct.unpack("<I", fh.read(4))
    return fh.read(length).decode("utf-8")


def _write_array(fh, tag: str, arr: np.ndarray | None) -> None:
    _write_str(fh, tag)
    if arr is None:
        fh.write(struct.pack("<BB", 0, 0))
        return
    arr = np.ascontiguousarray(arr)
    if arr.dtype.kind == "i":
        arr = arr.astype("<i8")
        code = 1
    else:
        arr = arr.astype("<f8")
        code = 0
    fh.write(struct.pack("<BB", code, 1))
    fh.write(struct.pack("<I", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<Q", d))
    fh.write(arr.tobytes(order="C"))


def _read_array(fh) -> tuple[str, np.ndarray | None]:
    tag = _read_str(fh)
    code, present = struct.unpack("<BB", fh.read(2))
    if not present:
        return tag, None
    (ndim,) = struct.unpack("<I", fh.read(4))
    shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
    dtype = np.dtype(_DTYPES[code])
    count = int(np.prod(shape)) if shape else 1
    data = fh.read(count * dtype.itemsize)
    if len(data) != count * dtype.itemsize:
        raise ModelFormatError("truncated model file")
    arr = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
    return tag, arr


def save_model(model: ReducedModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, model.problem_name)
        _write_str(fh, model.rhs_mode)
        fh.write(struct.pack("<ddQ", model.epsilon, model.eta, model.fine_dim))
        fh.write(struct.pack("<I", len(_ARRAY_FIELDS)))
        for name in _ARRAY_FIELDS:
            _write_array(fh, name, getattr(model, name))


def load_model(path: str | Path) -> ReducedModel:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ModelFormatError(f"{path} is not a reduced-model file")
        try:
            (version,) = struct.unpack("<I", fh.read(4))
            if version != VERSION:
                raise ModelFormatError(f"unsupported model version {version}")
            name = _read_str(fh)
            rhs_mode = _read_str(fh)
            epsilon, eta, fine_dim = struct.unpack("<ddQ", fh.read(24))
            (n_arrays,) = struct.unpack("<I", fh.read(4))
            arrays: dict[str, np.ndarray | None] = {}
            for _ in range(n_arrays):
                tag, arr = _read_array(fh)
                arrays[tag] = arr
        except (struct.error, ValueError, UnicodeDecodeError) as exc:
            raise ModelFormatError(f"{path} is truncated or corrupt: {exc}") from exc
    missing = [f for f in _ARRAY_FIELDS if f not in arrays]
    if missing:
        raise ModelFormatError(f"model file misses arrays: {', '.join(missing)}")
    return ReducedModel(
        problem_name=name,
        fine_dim=int(fine_dim),
        epsilon=epsilon,
        eta=eta,
        skeleton_indices=arrays["skeleton_indices"],
        additional_indices=arrays["additional_indices"],
        basis=arrays["basis"],
        singular_values=arrays["singular_values"],
        mixing=arrays["mixing"],
        projected_operators=arrays["projected_operators"],
        projected_offset=arrays["projected_offset"],
        projected_rhs=arrays["projected_rhs"],
        rhs_mode=rhs_mode,
        operator_plan_columns=arrays["operator_plan_columns"],
        timings={},
    )
