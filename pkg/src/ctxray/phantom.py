"""Deterministic synthetic thorax phantoms.

Shapes are analytic quadrics and cylinders rasterized at voxel centers
with no anti-aliasing, so label masks agree exactly with the rasterized
supports and every measurement has a closed-form oracle. Geometry is
specified in the units of a 256-voxel grid and scales with the
requested size. All lateral centers sit on the grid's mirror axis, so
the default phantom projects to an exactly left/right symmetric image.

Composition order is body, lungs, heart, spine, clavicles, ribs,
trachea, table; a later shape overwrites the HU of an earlier one where
they touch (only the rib band crosses the lungs in the default
geometry), while label masks always keep the full analytic support.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import taxonomy as tx
from .errors import SpecError
from .maskio import save_labelvolume
from .volume import LabelVolume, Volume, save_volume

_BASE = 256  # geometry reference grid

DEFAULT_VERTEBRAE = tuple(
    lvl for lvl in tx.VERTEBRA_LEVELS if lvl.startswith(("T", "L"))
)  # T1..T12, L1..L5


@dataclass(frozen=True)
class PhantomSpec:
    size: int = 256
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0
    noise_hu: float = 0.0
    table: bool = False
    heart_half_width: float = 50.0  # 256-scale voxels
    thoracic_half_width: float = 125.0  # 256-scale voxels
    rib_pairs: int = 9
    vertebra_levels: tuple = DEFAULT_VERTEBRAE
    spine_offsets: tuple = (0.0,) * len(DEFAULT_VERTEBRAE)  # 256-scale voxels
    hu_air: int = -1000
    hu_soft: int = 40
    hu_lung: int = -800
    hu_spine: int = 700
    hu_rib: int = 500
    hu_table: int = 100

    def __post_init__(self):
        if self.size < 32:
            raise SpecError("phantom grid must be at least 32 voxels")
        if len(self.spine_offsets) != len(self.vertebra_levels):
            raise SpecError("one spine offset per vertebra level required")
        if not 1 <= self.rib_pairs <= 12:
            raise SpecError("rib pairs must lie in 1..12")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        data = json.loads(text)
        for key in ("spacing", "vertebra_levels", "spine_offsets"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def scoliosis_variant(spec: PhantomSpec, amplitude: float,
                      wavelength: float | None = None) -> PhantomSpec:
    """Sinusoidal lateral displacement of the vertebra centers.

    Amplitude is in 256-scale voxels; the wavelength defaults to the
    full spine length (one period head to base). Amplitude 0 returns
    the spec unchanged.
    """
    if amplitude < 0:
        raise SpecError("scoliosis amplitude must be >= 0")
    if amplitude == 0:
        return spec
    count = len(spec.vertebra_levels)
    pitch = _SPINE_PITCH
    length = pitch * count
    if wavelength is None:
        wavelength = length
    offsets = tuple(
        amplitude * math.sin(2 * math.pi * (i * pitch + pitch / 2) / wavelength)
        for i in range(count)
    )
    return replace(spec, spine_offsets=offsets)


def enlarged_heart_variant(spec: PhantomSpec, half_width: float = 87.0) -> PhantomSpec:
    return replace(spec, heart_half_width=float(half_width))


# 256-scale geometry constants
_BODY_HALF = (126.0, 96.0)
_BODY_Z = (6.0, 249.0)
_LUNG_HALF = (50.0, 38.0, 85.0)
_LUNG_CENTER_YZ = (118.0, 128.0)
_HEART_HALF_YZ = (24.0, 35.0)
_HEART_CENTER_YZ = (70.0, 150.0)
_SPINE_Y = 190.0
_SPINE_RADIUS = 9.0
_SPINE_Z0 = 16.0
_SPINE_PITCH = 13.0  # cylinder height 11 + gap 2
_SPINE_HEIGHT = 11.0
_CLAVICLE_RADIUS = 5.0
_CLAVICLE_YZ = (90.0, 46.0)
_CLAVICLE_X = (40.0, 105.0)  # right side; left mirrors
_RIB_BAND = (0.80, 0.92)  # normalized body-ellipse radius
_RIB_Z0 = 60.0
_RIB_PITCH = 14.0
_RIB_HALF_THICKNESS = 4.0
_TRACHEA_RADIUS = 6.0
_TRACHEA_Y = 118.0
_TRACHEA_Z = (16.0, 86.0)  # stem rows
_BRANCH_Z1 = 126.0
_BRANCH_BASE_OFFSET = 8.0
_BRANCH_SPREAD = 0.2
_DIAPHRAGM_Z = 218.0
_MEDIASTINUM_HALF_X = 23.5
_MEDIASTINUM_Y = (60.0, 170.0)
_MEDIASTINUM_Z = (16.0, 208.0)
_TABLE_Y = (232.0, 243.0)
_TABLE_HALF_X = 99.5


def _check_inside(name: str, lo: float, hi: float, size: int):
    if lo < 0 or hi > size - 1:
        raise SpecError(f"shape {name!r} leaves the grid: [{lo:.1f}, {hi:.1f}]")


def generate_phantom(spec: PhantomSpec) -> tuple[Volume, LabelVolume]:
    """Rasterize the phantom; returns the HU volume and its label masks."""
    n = spec.size
    s = n / _BASE
    cx = (n - 1) / 2.0  # mirror axis
    xs = np.arange(n, dtype=np.float64)
    X = xs[:, None, None]
    Y = xs[None, :, None]
    Z = xs[None, None, :]

    vol = np.full((n, n, n), float(spec.hu_air))
    masks: dict[str, np.ndarray] = {}

    def ellipse2d(cy, ax, ay):
        return ((xs[:, None] - cx) / ax) ** 2 + ((xs[None, :] - cy) / ay) ** 2

    # body: elliptic cylinder along z
    bx, by = _BODY_HALF[0] * s, _BODY_HALF[1] * s
    body_rho2 = ellipse2d(cx, bx, by)
    z0, z1 = _BODY_Z[0] * s, _BODY_Z[1] * s
    _check_inside("body", cx - bx, cx + bx, n)
    zslab = (Z >= z0) & (Z <= z1)
    body = (body_rho2 <= 1.0)[:, :, None] & zslab
    vol[body] = spec.hu_soft

    # lungs: ellipsoids, outer edges at the thoracic half width
    lx, ly, lz = (h * s for h in _LUNG_HALF)
    lcy, lcz = (c * s for c in _LUNG_CENTER_YZ)
    offset = spec.thoracic_half_width * s - lx
    for side, sign in (("right", -1), ("left", +1)):
        lcx = cx + sign * offset
        _check_inside(f"lung_{side}", lcx - lx, lcx + lx, n)
        m = (
            ((X - lcx) / lx) ** 2 + ((Y - lcy) / ly) ** 2 + ((Z - lcz) / lz) ** 2
        ) <= 1.0
        masks[tx.lung(side)] = m
        vol[m] = spec.hu_lung

    # heart: ellipsoid, anterior and centered laterally
    hx = spec.heart_half_width * s
    hy, hz = (h * s for h in _HEART_HALF_YZ)
    hcy, hcz = (c * s for c in _HEART_CENTER_YZ)
    _check_inside("heart", cx - hx, cx + hx, n)
    heart = (((X - cx) / hx) ** 2 + ((Y - hcy) / hy) ** 2 + ((Z - hcz) / hz) ** 2) <= 1.0
    masks[tx.HEART] = heart
    vol[heart] = spec.hu_soft

    # spine: stacked cylinders along z with per-level lateral offsets
    r = _SPINE_RADIUS * s
    sy = _SPINE_Y * s
    for i, level in enumerate(spec.vertebra_levels):
        vcx = cx + spec.spine_offsets[i] * s
        vz0 = (_SPINE_Z0 + i * _SPINE_PITCH) * s
        vz1 = vz0 + _SPINE_HEIGHT * s
        _check_inside(f"vertebrae_{level}", vz0, vz1, n)
        disk = ((xs[:, None] - vcx) ** 2 + (xs[None, :] - sy) ** 2) <= r**2
        m = disk[:, :, None] & (Z >= vz0) & (Z <= vz1)
        masks[f"vertebrae_{level}"] = m
        vol[m] = spec.hu_spine

    # clavicles: cylinders along x, above the lung apices
    cr = _CLAVICLE_RADIUS * s
    ccy, ccz = (c * s for c in _CLAVICLE_YZ)
    disk_yz = ((xs[:, None] - ccy) ** 2 + (xs[None, :] - ccz) ** 2) <= cr**2
    for side, (x0, x1) in (
        ("right", (_CLAVICLE_X[0] * s, _CLAVICLE_X[1] * s)),
        ("left", ((n - 1) - _CLAVICLE_X[1] * s, (n - 1) - _CLAVICLE_X[0] * s)),
    ):
        _check_inside(f"clavicle_{side}", x0, x1, n)
        m = disk_yz[None, :, :] & (X >= x0) & (X <= x1)
        masks[tx.clavicle(side)] = m
        vol[m] = spec.hu_rib

    # ribs: elliptical annulus arcs on the body shell, one band per level
    ring = (body_rho2 >= _RIB_BAND[0] ** 2) & (body_rho2 <= _RIB_BAND[1] ** 2)
    right_half = ring & (xs[:, None] < cx)
    left_half = ring & (xs[:, None] > cx)
    for i in range(spec.rib_pairs):
        zc = (_RIB_Z0 + i * _RIB_PITCH) * s
        dz = _RIB_HALF_THICKNESS * s
        _check_inside(f"rib_{i + 1}", zc - dz, zc + dz, n)
        slab = (Z >= zc - dz) & (Z <= zc + dz)
        for side, half in (("right", right_half), ("left", left_half)):
            m = half[:, :, None] & slab
            masks[tx.rib(side, i + 1)] = m
            vol[m] = spec.hu_rib

    # trachea: air stem splitting into two diverging branches
    tr = _TRACHEA_RADIUS * s
    ty = _TRACHEA_Y * s
    tz0, tz1 = _TRACHEA_Z[0] * s, _TRACHEA_Z[1] * s
    bz1 = _BRANCH_Z1 * s
    stem_disk = ((xs[:, None] - cx) ** 2 + (xs[None, :] - ty) ** 2) <= tr**2
    trachea = stem_disk[:, :, None] & (Z >= tz0) & (Z <= tz1)
    branch_off = (_BRANCH_BASE_OFFSET + _BRANCH_SPREAD * (Z / s - _TRACHEA_Z[1] - 1)) * s
    in_branch_rows = (Z > tz1) & (Z <= bz1)
    for sign in (-1, +1):
        bx_z = cx + sign * branch_off
        branch = (((X - bx_z) ** 2 + (Y - ty) ** 2) <= tr**2) & in_branch_rows
        trachea |= branch
    _check_inside("trachea", tz0, bz1, n)
    masks[tx.TRACHEA] = trachea
    vol[trachea] = spec.hu_air

    # region labels (overlap anatomy by design)
    masks[tx.SUB_DIAPHRAGM] = body & (Z >= _DIAPHRAGM_Z * s)
    med = (
        (np.abs(xs[:, None, None] - cx) <= _MEDIASTINUM_HALF_X * s)
        & (Y >= _MEDIASTINUM_Y[0] * s)
        & (Y <= _MEDIASTINUM_Y[1] * s)
        & (Z >= _MEDIASTINUM_Z[0] * s)
        & (Z <= _MEDIASTINUM_Z[1] * s)
    )
    masks[tx.MEDIASTINUM] = med

    if spec.table:
        table = (
            (Y >= _TABLE_Y[0] * s)
            & (Y <= _TABLE_Y[1] * s)
            & (np.abs(X - cx) <= _TABLE_HALF_X * s)
            & zslab
        )
        vol[table] = spec.hu_table

    if spec.noise_hu > 0:
        rng = np.random.default_rng(spec.seed)
        vol = vol + rng.uniform(-spec.noise_hu, spec.noise_hu, vol.shape)

    volume = Volume(
        np.rint(vol).astype(np.int16), spec.spacing
    )
    labels = LabelVolume(tuple(masks), masks, spec.spacing)
    return volume, labels


def save_phantom(spec: PhantomSpec, out_dir, name: str) -> dict:
    """Write volume (native format), label archive and spec JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    volume, labels = generate_phantom(spec)
    volume_path = out_dir / f"{name}.json"
    save_volume(volume, volume_path)
    label_index, label_rle = save_labelvolume(labels, out_dir / f"{name}.labels")
    spec_path = out_dir / f"{name}.spec.json"
    spec_path.write_text(spec.to_json() + "\n")
    return {
        "volume": volume_path,
        "labels": label_index,
        "labels_payload": label_rle,
        "spec": spec_path,
    }
