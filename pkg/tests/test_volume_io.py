import gzip
import struct

import numpy as np
import pytest

from ctxray.errors import ArgumentError, FormatError, UnsupportedDatatypeError
from ctxray.volume import Volume, clip_hu, load_volume, save_volume


def build_nifti(data, spacing=(1.0, 1.0, 1.0), slope=1.0, inter=0.0,
                datatype=None, claimed_dims=None):
    """Hand-rolled NIfTI-1 bytes, independent of the package writer."""
    codes = {np.dtype(np.uint8): 2, np.dtype(np.int16): 4, np.dtype(np.float32): 16}
    dtype = np.dtype(data.dtype)
    code = datatype if datatype is not None else codes[dtype]
    dims = claimed_dims or data.shape
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, code)
    struct.pack_into("<h", hdr, 72, dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<2f", hdr, 112, slope, inter)
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr) + b"\x00" * 4 + data.tobytes(order="F")


def test_load_zero_volume(tmp_path):
    data = np.zeros((4, 4, 4), dtype=np.int16)
    path = tmp_path / "zeros.nii"
    path.write_bytes(build_nifti(data))
    vol = load_volume(path)
    assert vol.dims == (4, 4, 4)
    assert vol.spacing == (1.0, 1.0, 1.0)
    assert np.array_equal(vol.data, data)


def test_scale_intercept_applied(tmp_path):
    data = np.full((2, 2, 2), 512, dtype=np.int16)
    path = tmp_path / "scaled.nii"
    path.write_bytes(build_nifti(data, slope=2.0, inter=-1024.0))
    vol = load_volume(path)
    # oracle: scale * raw + intercept
    assert float(vol.data[0, 0, 0]) == 2.0 * 512 + (-1024.0) == 0.0


def test_truncated_file_reports_byte_counts(tmp_path):
    data = np.zeros((32, 32, 32), dtype=np.int16)
    path = tmp_path / "trunc.nii"
    path.write_bytes(build_nifti(data, claimed_dims=(64, 64, 64)))
    with pytest.raises(FormatError) as exc:
        load_volume(path)
    message = str(exc.value)
    assert str(64 * 64 * 64 * 2) in message
    assert str(32 * 32 * 32 * 2) in message


def test_unsupported_datatype_lists_codes(tmp_path):
    data = np.zeros((2, 2, 2), dtype=np.int16)
    path = tmp_path / "bad.nii"
    path.write_bytes(build_nifti(data, datatype=8))  # int32: not supported
    with pytest.raises(UnsupportedDatatypeError) as exc:
        load_volume(path)
    for code in (2, 4, 16):
        assert str(code) in str(exc.value)


def test_bad_magic_names_offset(tmp_path):
    data = np.zeros((2, 2, 2), dtype=np.int16)
    raw = bytearray(build_nifti(data))
    raw[344:348] = b"xxxx"
    path = tmp_path / "magic.nii"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="344"):
        load_volume(path)


def test_gzip_container(tmp_path):
    data = np.arange(8, dtype=np.int16).reshape(2, 2, 2)
    path = tmp_path / "vol.nii.gz"
    path.write_bytes(gzip.compress(build_nifti(data)))
    assert np.array_equal(load_volume(path).data, data)


@pytest.mark.parametrize("dtype", [np.uint8, np.int16, np.float32])
@pytest.mark.parametrize("ext", [".nii", ".nii.gz", ".json"])
def test_roundtrip_bit_exact(tmp_path, dtype, ext):
    rng = np.random.default_rng(42)
    if dtype is np.float32:
        data = rng.normal(size=(8, 8, 8)).astype(np.float32)
    else:
        info = np.iinfo(dtype)
        data = rng.integers(info.min, info.max, size=(8, 8, 8)).astype(dtype)
    spacing = tuple(float(np.float32(s)) for s in (0.5, 0.75, 1.25))
    vol = Volume(data, spacing)
    path = tmp_path / f"vol{ext}"
    save_volume(vol, path)
    back = load_volume(path)
    assert back.data.dtype == data.dtype
    assert np.array_equal(back.data, data)
    assert back.dims == vol.dims
    assert back.spacing == spacing


def test_roundtrip_property_random_volumes(tmp_path):
    rng = np.random.default_rng(7)
    for trial in range(20):
        dtype = [np.uint8, np.int16, np.float32][trial % 3]
        shape = tuple(rng.integers(2, 7, size=3))
        if dtype is np.float32:
            data = rng.normal(size=shape).astype(np.float32)
        else:
            info = np.iinfo(dtype)
            data = rng.integers(info.min, info.max, size=shape).astype(dtype)
        spacing = tuple(float(np.float32(s)) for s in rng.uniform(0.2, 3.0, size=3))
        vol = Volume(data, spacing)
        path = tmp_path / f"v{trial}.nii"
        save_volume(vol, path)
        back = load_volume(path)
        assert np.array_equal(back.data, data) and back.spacing == spacing


def test_spacing_preserved_exactly_native(tmp_path):
    vol = Volume(np.zeros((3, 3, 3), dtype=np.int16), (0.74, 0.74, 1.13))
    path = tmp_path / "ribspacing.json"
    save_volume(vol, path)
    assert load_volume(path).spacing == (0.74, 0.74, 1.13)


def test_spacing_nifti_float32_faithful(tmp_path):
    vol = Volume(np.zeros((3, 3, 3), dtype=np.int16), (0.74, 0.74, 1.13))
    path = tmp_path / "ribspacing.nii"
    save_volume(vol, path)
    expected = tuple(float(np.float32(s)) for s in (0.74, 0.74, 1.13))
    assert load_volume(path).spacing == expected


def test_write_failure_carries_path(tmp_path):
    vol = Volume(np.zeros((2, 2, 2), dtype=np.int16), (1, 1, 1))
    target = tmp_path / "no" / "such" / "dir" / "vol.nii"
    with pytest.raises(OSError, match="vol.nii"):
        save_volume(vol, target)


def test_native_payload_size_mismatch(tmp_path):
    vol = Volume(np.zeros((4, 4, 4), dtype=np.int16), (1, 1, 1))
    path = tmp_path / "vol.json"
    save_volume(vol, path)
    raw = path.with_suffix(".raw")
    raw.write_bytes(raw.read_bytes()[:-10])
    with pytest.raises(FormatError, match="expected"):
        load_volume(path)


class TestClipHu:
    def test_within_window_unchanged(self):
        data = np.array([[[-1024, 0, 3071]]], dtype=np.int16)
        vol = Volume(data, (1, 1, 1))
        assert np.array_equal(clip_hu(vol).data, data)

    def test_clamps_below(self):
        vol = Volume(np.array([[[-2000]]], dtype=np.int16), (1, 1, 1))
        assert clip_hu(vol, -1024, 3071).data[0, 0, 0] == -1024

    def test_idempotent_on_random(self):
        rng = np.random.default_rng(0)
        data = rng.integers(-5000, 5000, size=(6, 6, 6)).astype(np.int16)
        vol = Volume(data, (1, 1, 1))
        once = clip_hu(vol)
        twice = clip_hu(once)
        # brute-force elementwise oracle
        expected = np.minimum(np.maximum(data, -1024), 3071)
        assert np.array_equal(once.data, expected)
        assert np.array_equal(twice.data, once.data)

    def test_monotone(self):
        rng = np.random.default_rng(1)
        v = rng.integers(-5000, 5000, size=(5, 5, 5)).astype(np.int16)
        w = v + rng.integers(0, 100, size=v.shape).astype(np.int16)
        cv = clip_hu(Volume(v, (1, 1, 1))).data
        cw = clip_hu(Volume(w, (1, 1, 1))).data
        assert np.all(cv <= cw)

    def test_bad_window(self):
        vol = Volume(np.zeros((2, 2, 2), dtype=np.int16), (1, 1, 1))
        with pytest.raises(ArgumentError):
            clip_hu(vol, 100, -100)


def test_volume_invariants():
    with pytest.raises(ArgumentError):
        Volume(np.zeros((2, 2), dtype=np.int16), (1, 1, 1))
    with pytest.raises(ArgumentError):
        Volume(np.zeros((2, 2, 2), dtype=np.int16), (1, 0, 1))
    with pytest.raises(ArgumentError):
        Volume(np.zeros((2, 2, 2), dtype=np.int16), (1, 1, 1), ("a", "b", "c"))
