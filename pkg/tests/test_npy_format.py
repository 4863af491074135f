import io
import struct
import zipfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from physbench.dataset_io import decode_npy, encode_npy, read_npz, write_npz
from physbench.errors import MalformedHeaderError, MissingFileError

DTYPES = [np.float64, np.int64, np.bool_]


def _npsave(arr):
    buf = io.BytesIO()
    np.save(buf, arr, allow_pickle=False)
    return buf.getvalue()


@pytest.mark.parametrize("dtype", DTYPES)
@pytest.mark.parametrize("shape", [(), (0,), (3,), (3, 1), (2, 4, 2), (2, 0)])
def test_matches_reference_writer(dtype, shape):
    arr = np.arange(int(np.prod(shape)), dtype=np.int64).reshape(shape).astype(dtype)
    assert encode_npy(arr) == _npsave(arr)


@given(hnp.arrays(st.sampled_from(DTYPES), hnp.array_shapes(min_dims=0, max_dims=3, min_side=0, max_side=5)))
def test_round_trip_and_alignment(arr):
    buf = encode_npy(arr)
    assert buf[:8] == b"\x93NUMPY\x01\x00"
    (hlen,) = struct.unpack("<H", buf[8:10])
    assert (10 + hlen) % 64 == 0
    assert buf[10 + hlen - 1 : 10 + hlen] == b"\n"
    back = decode_npy(buf)
    assert back.dtype == arr.dtype and back.shape == arr.shape
    assert back.tobytes() == np.ascontiguousarray(arr).tobytes()
    assert np.array_equal(np.load(io.BytesIO(buf)), arr, equal_nan=arr.dtype.kind == "f")


def test_fortran_input_is_written_c_order():
    arr = np.asfortranarray(np.arange(6.0).reshape(2, 3))
    assert np.array_equal(decode_npy(encode_npy(arr)), arr)
    assert b"'fortran_order': False" in encode_npy(arr)


def test_decoded_arrays_are_read_only():
    with pytest.raises(ValueError):
        decode_npy(encode_npy(np.zeros(2)))[0] = 1.0


def test_unsupported_dtype():
    with pytest.raises(TypeError):
        encode_npy(np.array(["a"]))


@pytest.mark.parametrize(
    "buf",
    [
        b"",
        b"NOTNUMPY\x01\x00",
        b"\x93NUMPY\x09\x00\x00\x00",
        b"\x93NUMPY\x01\x00\x50\x00{'descr'",
    ],
)
def test_malformed_headers(buf):
    with pytest.raises(MalformedHeaderError):
        decode_npy(buf)


def test_wrong_payload_length_and_bad_keys():
    good = encode_npy(np.zeros(3))
    with pytest.raises(MalformedHeaderError):
        decode_npy(good[:-8])
    bad = good.replace(b"'fortran_order'", b"'fortran_ordex'")
    with pytest.raises(MalformedHeaderError):
        decode_npy(bad)


def test_npz_is_byte_stable_and_sorted(tmp_path):
    records = {"b": np.ones(2), "a": np.arange(3), "c": np.array([True, False])}
    write_npz(tmp_path / "x.npz", records)
    write_npz(tmp_path / "y.npz", dict(reversed(list(records.items()))))
    assert (tmp_path / "x.npz").read_bytes() == (tmp_path / "y.npz").read_bytes()
    with zipfile.ZipFile(tmp_path / "x.npz") as zf:
        infos = zf.infolist()
        assert [i.filename for i in infos] == ["a.npy", "b.npy", "c.npy"]
        assert all(i.compress_type == zipfile.ZIP_STORED for i in infos)
        assert all(i.date_time == (1980, 1, 1, 0, 0, 0) for i in infos)
    loaded = np.load(tmp_path / "x.npz")
    assert set(loaded.files) == {"a", "b", "c"}
    back = read_npz(tmp_path / "x.npz")
    assert all(np.array_equal(back[k], v) for k, v in records.items())


def test_npz_errors(tmp_path):
    with pytest.raises(MissingFileError):
        read_npz(tmp_path / "absent.npz")
    (tmp_path / "junk.npz").write_bytes(b"not a zip")
    with pytest.raises(MalformedHeaderError):
        read_npz(tmp_path / "junk.npz")
    with zipfile.ZipFile(tmp_path / "odd.npz", "w") as zf:
        zf.writestr("readme.txt", "hi")
    with pytest.raises(MalformedHeaderError):
        read_npz(tmp_path / "odd.npz")
