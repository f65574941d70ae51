"""Volume data types and file I/O.

Arrays are indexed ``[x, y, z]``. By default axis 0 runs along the
sagittal direction (left-right), axis 1 along the coronal direction
(anterior-posterior) and axis 2 along the axial direction
(superior-inferior, row 0 = superior). Spacing is mm per voxel.

Two on-disk formats are supported:

* a NIfTI-1 subset: single ``.nii`` / ``.nii.gz`` file, little-endian,
  datatypes uint8 / int16 / float32, spacing taken from ``pixdim``,
  ``scl_slope`` / ``scl_inter`` honored;
* a native raw format: ``<name>.json`` sidecar (dims, spacing, dtype,
  orientation) next to a flat little-endian ``<name>.raw`` payload.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError, UnsupportedDatatypeError

DEFAULT_HU_WINDOW = (-1024, 3071)  # conventional 12-bit CT calibration
DEFAULT_ORIENTATION = ("sagittal", "coronal", "axial")

_AXIS_ROLES = frozenset(DEFAULT_ORIENTATION)

# NIfTI-1 datatype code -> numpy dtype (little-endian), supported subset
_NIFTI_DTYPES = {2: np.dtype("<u1"), 4: np.dtype("<i2"), 16: np.dtype("<f4")}
_NIFTI_CODES = {v: k for k, v in _NIFTI_DTYPES.items()}
_NATIVE_DTYPES = {"uint8": "<u1", "int16": "<i2", "float32": "<f4"}


def _check_grid(dims, spacing, orientation):
    if len(dims) != 3 or any(int(d) <= 0 for d in dims):
        raise ArgumentError(f"dims must be three positive integers, got {dims}")
    if len(spacing) != 3 or any(not (s > 0) for s in spacing):
        raise ArgumentError(f"spacing must be strictly positive, got {spacing}")
    if set(orientation) != _AXIS_ROLES or len(orientation) != 3:
        raise ArgumentError(
            f"orientation must be a permutation of {sorted(_AXIS_ROLES)}, got {orientation}"
        )


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a voxel grid: extent, spacing (mm) and axis roles."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    orientation: tuple[str, str, str] = DEFAULT_ORIENTATION

    def __post_init__(self):
        _check_grid(self.dims, self.spacing, self.orientation)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "orientation", tuple(self.orientation))

    def axis(self, role: str) -> int:
        """Index of the axis carrying the given anatomical role."""
        return self.orientation.index(role)


@dataclass(frozen=True)
class Volume:
    """3D scalar grid in Hounsfield units plus grid geometry."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    orientation: tuple[str, str, str] = DEFAULT_ORIENTATION

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ArgumentError(f"volume data must be 3D, got shape {self.data.shape}")
        _check_grid(self.data.shape, self.spacing, self.orientation)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "orientation", tuple(self.orientation))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.dims, self.spacing, self.orientation)

    def axis(self, role: str) -> int:
        return self.orientation.index(role)


@dataclass(frozen=True)
class LabelVolume:
    """Per-class binary 3D masks sharing one grid.

    Masks may overlap: anatomy superimposes along projection rays
    (e.g. lung tissue behind the heart), so no exclusivity is imposed.
    """

    classes: tuple[str, ...]
    masks: dict
    spacing: tuple[float, float, float]
    orientation: tuple[str, str, str] = DEFAULT_ORIENTATION

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(set(self.classes)) != len(self.classes):
            raise ArgumentError("class names must be unique")
        if set(self.masks) != set(self.classes):
            raise ArgumentError("masks must cover exactly the listed classes")
        dims = None
        for name in self.classes:
            m = self.masks[name]
            if m.ndim != 3:
                raise ArgumentError(f"mask {name!r} must be 3D")
            if dims is None:
                dims = m.shape
            elif m.shape != dims:
                raise ArgumentError(
                    f"mask {name!r} has dims {m.shape}, expected {dims}"
                )
        if dims is None:
            raise ArgumentError("label volume needs at least one class")
        _check_grid(dims, self.spacing, self.orientation)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "orientation", tuple(self.orientation))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.masks[self.classes[0]].shape

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.dims, self.spacing, self.orientation)

    def mask(self, name: str) -> np.ndarray:
        return self.masks[name]


def clip_hu(volume: Volume, lo: float = DEFAULT_HU_WINDOW[0],
            hi: float = DEFAULT_HU_WINDOW[1]) -> Volume:
    """Clamp every voxel into [lo, hi]. Idempotent and monotone."""
    if not lo < hi:
        raise ArgumentError(f"clip window requires lo < hi, got [{lo}, {hi}]")
    return Volume(np.clip(volume.data, lo, hi), volume.spacing, volume.orientation)


# --------------------------------------------------------------------------
# NIfTI-1 subset
# --------------------------------------------------------------------------

def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _load_nifti(path: Path) -> Volume:
    with _open_maybe_gzip(path) as f:
        hdr = f.read(348)
        if len(hdr) < 348:
            raise FormatError(
                f"{path}: header truncated to {len(hdr)} bytes, expected 348", offset=0
            )
        (sizeof_hdr,) = struct.unpack_from("<i", hdr, 0)
        if sizeof_hdr != 348:
            swapped = struct.unpack_from(">i", hdr, 0)[0]
            if swapped == 348:
                raise FormatError(
                    f"{path}: big-endian files are not supported", offset=0
                )
            raise FormatError(
                f"{path}: bad sizeof_hdr {sizeof_hdr}, expected 348", offset=0
            )
        magic = hdr[344:348]
        if magic != b"n+1\x00":
            raise FormatError(
                f"{path}: bad magic {magic!r}, expected b'n+1\\x00'", offset=344
            )
        dim = struct.unpack_from("<8h", hdr, 40)
        ndim = dim[0]
        if not 1 <= ndim <= 7:
            raise FormatError(f"{path}: dim[0]={ndim} out of range", offset=40)
        shape = [max(1, d) for d in dim[1 : 1 + ndim]]
        if any(d != 1 for d in shape[3:]) or len([d for d in shape[:3] if d > 0]) < 3:
            raise FormatError(
                f"{path}: only 3D volumes are supported, got dims {shape}", offset=40
            )
        nx, ny, nz = (shape + [1, 1, 1])[:3]
        (datatype,) = struct.unpack_from("<h", hdr, 70)
        if datatype not in _NIFTI_DTYPES:
            raise UnsupportedDatatypeError(datatype, _NIFTI_DTYPES)
        dtype = _NIFTI_DTYPES[datatype]
        pixdim = struct.unpack_from("<8f", hdr, 76)
        spacing = tuple(float(p) for p in pixdim[1:4])
        (vox_offset,) = struct.unpack_from("<f", hdr, 108)
        slope, inter = struct.unpack_from("<2f", hdr, 112)
        vox_offset = int(vox_offset)
        if vox_offset < 348:
            raise FormatError(f"{path}: vox_offset {vox_offset} < 348", offset=108)
        f.read(vox_offset - 348)
        expected = nx * ny * nz * dtype.itemsize
        payload = f.read(expected)
        if len(payload) != expected:
            raise FormatError(
                f"{path}: voxel payload holds {len(payload)} bytes, "
                f"expected {expected} for dims ({nx}, {ny}, {nz})",
                offset=vox_offset,
            )
    # NIfTI payload is Fortran-ordered with x fastest
    data = np.frombuffer(payload, dtype=dtype).reshape((nx, ny, nz), order="F").copy()
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        data = (data.astype(np.float32) * np.float32(slope)) + np.float32(inter)
    return Volume(data, spacing)


def _save_nifti(volume: Volume, path: Path) -> None:
    dtype = np.dtype(volume.data.dtype).newbyteorder("<")
    if dtype not in _NIFTI_CODES:
        raise UnsupportedDatatypeError(str(volume.data.dtype), _NIFTI_DTYPES)
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    nx, ny, nz = volume.dims
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, _NIFTI_CODES[dtype])
    struct.pack_into("<h", hdr, 72, dtype.itemsize * 8)
    sx, sy, sz = volume.spacing
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)
    hdr[344:348] = b"n+1\x00"
    payload = np.asfortranarray(volume.data.astype(dtype)).tobytes(order="F")
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "wb") as f:
            f.write(bytes(hdr))
            f.write(b"\x00\x00\x00\x00")  # no header extensions
            f.write(payload)
    except OSError as e:
        raise OSError(f"failed to write volume to {path}: {e}") from e


# --------------------------------------------------------------------------
# Native raw format (JSON sidecar + flat payload)
# --------------------------------------------------------------------------

def _load_native(path: Path) -> Volume:
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: malformed JSON header: {e}", offset=e.pos) from e
    for key in ("dims", "spacing", "dtype"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r} field")
    if header["dtype"] not in _NATIVE_DTYPES:
        raise UnsupportedDatatypeError(header["dtype"], _NATIVE_DTYPES)
    dtype = np.dtype(_NATIVE_DTYPES[header["dtype"]])
    dims = tuple(int(d) for d in header["dims"])
    raw_path = path.with_name(header.get("raw", path.stem + ".raw"))
    payload = raw_path.read_bytes()
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"{raw_path}: payload holds {len(payload)} bytes, "
            f"expected {expected} for dims {dims}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    orientation = tuple(header.get("orientation", DEFAULT_ORIENTATION))
    return Volume(data, tuple(float(s) for s in header["spacing"]), orientation)


def _save_native(volume: Volume, path: Path) -> None:
    dtype = np.dtype(volume.data.dtype)
    name = {np.dtype(v): k for k, v in _NATIVE_DTYPES.items()}.get(dtype.newbyteorder("<"))
    if name is None:
        raise UnsupportedDatatypeError(str(dtype), _NATIVE_DTYPES)
    raw_path = path.with_suffix(".raw")
    header = {
        "format": "ctxray-raw-volume",
        "version": 1,
        "dims": list(volume.dims),
        "spacing": list(volume.spacing),
        "dtype": name,
        "orientation": list(volume.orientation),
        "order": "C",
        "raw": raw_path.name,
    }
    try:
        path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
        raw_path.write_bytes(
            volume.data.astype(np.dtype(_NATIVE_DTYPES[name])).tobytes(order="C")
        )
    except OSError as e:
        raise OSError(f"failed to write volume to {path}: {e}") from e


def load_volume(path) -> Volume:
    """Load a volume from a NIfTI (.nii/.nii.gz) or native (.json) file."""
    path = Path(path)
    if path.suffix == ".json":
        return _load_native(path)
    return _load_nifti(path)


def save_volume(volume: Volume, path) -> None:
    """Write a volume; format chosen by extension (.nii/.nii.gz/.json)."""
    path = Path(path)
    if path.suffix == ".json":
        _save_native(volume, path)
    else:
        _save_nifti(volume, path)
