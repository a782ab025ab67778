"""On-disk formats: dataset containers, checkpoints, CSV and PGM exports.

Binary layouts (all integers and floats little-endian)::

    dataset    b"NODF" | u32 version | u64 meta_len | meta JSON (UTF-8)
               | inputs  f32[count, *shape] | targets f32[count, *shape]
    checkpoint b"NOCK" | u32 version | u64 meta_len | meta JSON (UTF-8)
               | per parameter: u16 name_len | name | u8 ndim | u32 dims[ndim] | f32 data

Metadata JSON is written with sorted keys and no whitespace so identical
content serializes to identical bytes. Files are written to a temporary
sibling and renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

DATASET_MAGIC = b"NODF"
CHECKPOINT_MAGIC = b"NOCK"
FORMAT_VERSION = 1
_F32 = np.dtype("<f4")


class FormatError(ValueError):
    pass


def dumps_meta(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def atomic_write(path: str | os.PathLike, payload: bytes | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def array_digest(arr: np.ndarray) -> str:
    arr = np.ascontiguousarray(arr)
    return sha256_bytes(arr.dtype.str.encode() + str(arr.shape).encode() + arr.tobytes())


def file_digest(path: str | os.PathLike) -> str:
    return sha256_bytes(Path(path).read_bytes())


def _header(magic: bytes, meta: dict) -> bytes:
    blob = dumps_meta(meta)
    return magic + struct.pack("<IQ", FORMAT_VERSION, len(blob)) + blob


def _read_header(buf: bytes, magic: bytes) -> tuple[dict, int]:
    if len(buf) < 16 or buf[:4] != magic:
        raise FormatError(f"bad magic: expected {magic!r}, got {buf[:4]!r}")
    version, meta_len = struct.unpack_from("<IQ", buf, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unknown format version {version}")
    end = 16 + meta_len
    if end > len(buf):
        raise FormatError("truncated metadata block")
    try:
        meta = json.loads(buf[16:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable metadata: {exc}") from None
    return meta, end


# ----------------------------------------------------------------------
# Datasets
# ----------------------------------------------------------------------

@dataclass
class DatasetContainer:
    """Input/target field pairs plus self-describing metadata."""

    inputs: np.ndarray
    targets: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float32)
        self.targets = np.ascontiguousarray(self.targets, dtype=np.float32)
        if self.inputs.shape != self.targets.shape:
            raise ValueError(f"inputs {self.inputs.shape} and targets {self.targets.shape} differ")
        self.meta = dict(self.meta)
        self.meta["count"] = int(self.inputs.shape[0])
        self.meta["sample_shape"] = list(self.inputs.shape[1:])

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def grid(self) -> int:
        return self.inputs.shape[-1]

    def to_bytes(self) -> bytes:
        return (
            _header(DATASET_MAGIC, self.meta)
            + self.inputs.astype(_F32, copy=False).tobytes()
            + self.targets.astype(_F32, copy=False).tobytes()
        )

    @classmethod
    def from_bytes(cls, buf: bytes) -> DatasetContainer:
        meta, off = _read_header(buf, DATASET_MAGIC)
        try:
            count = int(meta["count"])
            shape = tuple(int(s) for s in meta["sample_shape"])
        except (KeyError, TypeError, ValueError):
            raise FormatError("metadata lacks count/sample_shape") from None
        per = int(np.prod(shape)) * count
        expected = off + 2 * per * 4
        if len(buf) != expected:
            raise FormatError(f"payload length {len(buf) - off} bytes, expected {expected - off}")
        arr = np.frombuffer(buf, dtype=_F32, count=2 * per, offset=off).astype(np.float32)
        inputs = arr[:per].reshape((count, *shape))
        targets = arr[per:].reshape((count, *shape))
        return cls(inputs, targets, meta)

    def digest(self) -> str:
        return sha256_bytes(self.to_bytes())


def write_dataset(container: DatasetContainer, path: str | os.PathLike) -> Path:
    return atomic_write(path, container.to_bytes())


def read_dataset(path: str | os.PathLike) -> DatasetContainer:
    return DatasetContainer.from_bytes(Path(path).read_bytes())


# ----------------------------------------------------------------------
# Checkpoints
# ----------------------------------------------------------------------

def checkpoint_bytes(params: dict[str, np.ndarray], meta: dict) -> bytes:
    meta = dict(meta)
    meta["params"] = [{"name": k, "shape": list(np.shape(v))} for k, v in params.items()]
    out = io.BytesIO()
    out.write(_header(CHECKPOINT_MAGIC, meta))
    for name, value in params.items():
        arr = np.ascontiguousarray(value, dtype=_F32)
        encoded = name.encode("utf-8")
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<B", arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(arr.tobytes())
    return out.getvalue()


def write_checkpoint(params: dict[str, np.ndarray], meta: dict, path: str | os.PathLike) -> Path:
    return atomic_write(path, checkpoint_bytes(params, meta))


def parse_checkpoint(buf: bytes) -> tuple[dict[str, np.ndarray], dict]:
    meta, off = _read_header(buf, CHECKPOINT_MAGIC)
    declared = meta.get("params")
    if not isinstance(declared, list):
        raise FormatError("checkpoint metadata lacks a parameter index")
    params: dict[str, np.ndarray] = {}
    for entry in declared:
        try:
            (name_len,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off:off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", buf, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, off)
            off += 4 * ndim
        except struct.error:
            raise FormatError("truncated parameter header") from None
        if name != entry["name"]:
            raise FormatError(f"parameter block {name!r} out of order, expected {entry['name']!r}")
        if list(shape) != list(entry["shape"]):
            raise FormatError(f"parameter {name!r}: block shape {list(shape)} disagrees with declared {entry['shape']}")
        size = int(np.prod(shape)) if shape else 1
        if off + 4 * size > len(buf):
            raise FormatError(f"parameter {name!r}: truncated payload")
        params[name] = np.frombuffer(buf, dtype=_F32, count=size, offset=off).reshape(shape).astype(np.float32)
        off += 4 * size
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after last parameter block")
    return params, meta


def read_checkpoint(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    return parse_checkpoint(Path(path).read_bytes())


# ----------------------------------------------------------------------
# Text exports
# ----------------------------------------------------------------------

def write_csv(path: str | os.PathLike, header: list[str], rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def pgm_bytes(values: np.ndarray) -> tuple[bytes, float, float]:
    """Min-max normalize to 8-bit binary PGM (P5); constant maps become mid-gray."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        img = np.round((v - lo) / (hi - lo) * 255)
    else:
        img = np.full(v.shape, 128.0)
    img = img.astype(np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes(), lo, hi


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise FormatError("only 8-bit PGM supported")
    pixels = data[len(data) - w * h:]
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)
