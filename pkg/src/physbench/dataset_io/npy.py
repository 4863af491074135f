"""Reproducible NPY/NPZ encoding.

Arrays are written as NPY version 1.0, C order, little-endian, with the
header dict padded by spaces so that the data starts on a 64-byte boundary.
Archives are uncompressed ZIP files whose entries are sorted by name and
carry a fixed timestamp, so writing the same records twice gives the same
bytes.
"""

from __future__ import annotations

import ast
import struct
import zipfile

import numpy as np

from ..errors import MalformedHeaderError, MissingFileError

MAGIC = b"\x93NUMPY"
ALIGN = 64
ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _descr(dtype: np.dtype) -> str:
    if dtype.kind not in "biuf" or dtype.hasobject:
        raise TypeError(f"unsupported dtype {dtype}")
    if dtype.itemsize == 1:
        return "|" + dtype.str[1:]
    return "<" + dtype.str[1:]


def encode_npy(arr) -> bytes:
    arr = np.asarray(arr)
    descr = _descr(arr.dtype)
    header = "{'descr': %r, 'fortran_order': False, 'shape': %r, }" % (descr, tuple(int(n) for n in arr.shape))
    pad = ALIGN - (len(MAGIC) + 4 + len(header) + 1) % ALIGN
    header = header + " " * (pad % ALIGN) + "\n"
    data = np.ascontiguousarray(arr, dtype=np.dtype(descr)).tobytes(order="C")
    return MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header.encode("latin1") + data


def decode_npy(buf: bytes, name: str = "<array>") -> np.ndarray:
    if len(buf) < 10 or buf[:6] != MAGIC:
        raise MalformedHeaderError(f"{name}: missing NPY magic string")
    major = buf[6]
    if major == 1:
        (hlen,) = struct.unpack("<H", buf[8:10])
        start = 10
    elif major in (2, 3):
        (hlen,) = struct.unpack("<I", buf[8:12])
        start = 12
    else:
        raise MalformedHeaderError(f"{name}: unsupported NPY version {major}.{buf[7]}")
    raw = buf[start : start + hlen]
    if len(raw) != hlen:
        raise MalformedHeaderError(f"{name}: truncated header")
    try:
        header = ast.literal_eval(raw.decode("utf8" if major == 3 else "latin1"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise MalformedHeaderError(f"{name}: unparsable header ({exc})") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise MalformedHeaderError(f"{name}: header must have exactly descr, fortran_order, shape")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(n, int) and n >= 0 for n in shape):
        raise MalformedHeaderError(f"{name}: bad shape {shape!r}")
    try:
        dtype = np.dtype(header["descr"])
    except TypeError as exc:
        raise MalformedHeaderError(f"{name}: bad descr ({exc})") from None
    count = int(np.prod(shape, dtype=np.int64))
    body = buf[start + hlen :]
    if len(body) != count * dtype.itemsize:
        raise MalformedHeaderError(f"{name}: expected {count * dtype.itemsize} data bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype=dtype, count=count)
    order = "F" if header["fortran_order"] else "C"
    arr = arr.reshape(shape, order=order).astype(dtype.newbyteorder("="), copy=True)
    arr.setflags(write=False)
    return arr


def write_npz(path, records: dict) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED, allowZip64=True) as zf:
        for name in sorted(records):
            info = zipfile.ZipInfo(name + ".npy", date_time=ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_STORED
            info.create_system = 3
            info.external_attr = 0o644 << 16
            zf.writestr(info, encode_npy(records[name]))


def read_npz(path) -> dict:
    try:
        zf = zipfile.ZipFile(path, "r")
    except FileNotFoundError:
        raise MissingFileError(f"missing array archive {path}") from None
    except zipfile.BadZipFile as exc:
        raise MalformedHeaderError(f"{path}: not a ZIP archive ({exc})") from None
    out = {}
    with zf:
        for info in zf.infolist():
            if not info.filename.endswith(".npy"):
                raise MalformedHeaderError(f"{path}: unexpected entry {info.filename}")
            name = info.filename[: -len(".npy")]
            out[name] = decode_npy(zf.read(info), name)
    return out

