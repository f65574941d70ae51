"""Pseudo-radiograph synthesis and 2D mask projection.

A frontal view averages the volume along the coronal axis, a lateral
view along the sagittal axis. Projected images have axial position on
the rows (row 0 = superior) and the remaining axis on the columns, so
they read like a conventional radiograph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equalize import equalize_adaptive
from .errors import ArgumentError, DegenerateInputError, DegenerateVolumeError
from .imgops import (
    GhtParams,
    fill_holes_slicewise,
    histogram_from_values,
    ght_threshold,
    largest_component,
    threshold,
)
from .resample import resize_2d
from .volume import DEFAULT_HU_WINDOW, LabelVolume, Volume, clip_hu

VIEWS = ("frontal", "lateral")
BODY_THRESHOLD_HU = -100

_RAY_ROLE = {"frontal": "coronal", "lateral": "sagittal"}


@dataclass(frozen=True)
class Projection:
    """8-bit grayscale pseudo-radiograph with provenance."""

    image: np.ndarray
    view: str
    source_id: str = ""
    equalized: bool = False

    def __post_init__(self):
        if self.image.ndim != 2 or self.image.dtype != np.uint8:
            raise ArgumentError("projection image must be a 2D uint8 array")
        if self.view not in VIEWS:
            raise ArgumentError(f"view must be one of {VIEWS}, got {self.view!r}")


@dataclass
class MaskSet2D:
    """Named binary 2D masks aligned to one projection. Masks may overlap."""

    masks: dict
    view: str
    source_id: str = ""
    derived: set = field(default_factory=set)

    def __post_init__(self):
        if self.view not in VIEWS:
            raise ArgumentError(f"view must be one of {VIEWS}, got {self.view!r}")
        dims = None
        for name, m in self.masks.items():
            if m.ndim != 2:
                raise ArgumentError(f"mask {name!r} must be 2D")
            if dims is None:
                dims = m.shape
            elif m.shape != dims:
                raise ArgumentError(f"mask {name!r} has dims {m.shape}, expected {dims}")
        self.derived = set(self.derived)

    @property
    def classes(self) -> tuple:
        return tuple(self.masks)

    @property
    def dims(self):
        for m in self.masks.values():
            return m.shape
        return None

    def mask(self, name: str) -> np.ndarray:
        return self.masks[name]

    def has(self, name: str) -> bool:
        return name in self.masks and bool(self.masks[name].any())

    def with_masks(self, new: dict, derived: bool = True) -> "MaskSet2D":
        """Copy of this set with extra classes; existing classes untouched."""
        masks = dict(self.masks)
        masks.update(new)
        tags = set(self.derived) | (set(new) if derived else set())
        return MaskSet2D(masks, self.view, self.source_id, tags)


@dataclass(frozen=True)
class ProjectionConfig:
    body_weight: float = 1.0
    bone_weight: float = 0.3
    output_size: tuple[int, int] = (512, 512)
    equalize_frontal: bool = True
    equalize_lateral: bool = False
    clahe_tiles: tuple[int, int] = (8, 8)
    clahe_clip_limit: float = 4.0
    hu_window: tuple[float, float] = DEFAULT_HU_WINDOW
    ght: GhtParams = field(default_factory=GhtParams)

    def __post_init__(self):
        if self.body_weight < 0 or self.bone_weight < 0:
            raise ArgumentError("projection weights must be >= 0")
        if min(self.output_size) <= 0:
            raise ArgumentError(f"output size must be positive, got {self.output_size}")

    def equalize_for(self, view: str) -> bool:
        return self.equalize_frontal if view == "frontal" else self.equalize_lateral


def body_mask(volume: Volume) -> np.ndarray:
    """Patient outline: threshold at -100 HU, fill each axial contour,
    keep the largest component (drops the detached scanner table)."""
    mask = threshold(volume, BODY_THRESHOLD_HU, "ge")
    if not mask.any():
        raise DegenerateVolumeError(
            f"no voxel >= {BODY_THRESHOLD_HU} HU; volume has no body"
        )
    mask = fill_holes_slicewise(mask, axis=volume.axis("axial"))
    return largest_component(mask)


def bone_volume(volume: Volume, body: np.ndarray, ght: GhtParams = GhtParams(),
                hu_window: tuple[float, float] = DEFAULT_HU_WINDOW) -> np.ndarray:
    """Bone compartment via per-axial-slice histogram thresholding.

    Each slice's threshold comes from the GHT objective over the body
    voxels of that slice; voxels below it, outside the body, or on
    slices with fewer than two distinct HU values are set to the clip
    window minimum (air).
    """
    if body.shape != volume.data.shape:
        raise ArgumentError("body mask must share the volume grid")
    lo, hi = hu_window
    axial = volume.axis("axial")
    data = np.moveaxis(volume.data, axial, 0)
    body_m = np.moveaxis(body, axial, 0)
    out = np.full(data.shape, lo, dtype=np.float64)
    for k in range(data.shape[0]):
        vals = data[k][body_m[k]]
        if vals.size == 0 or np.unique(vals).size < 2:
            continue
        try:
            thr = ght_threshold(histogram_from_values(vals, lo, hi), ght)
        except DegenerateInputError:
            continue
        keep = body_m[k] & (data[k] >= thr)
        out[k][keep] = data[k][keep]
    return np.moveaxis(out, 0, axial)


def _project_axes(volume_or_grid, view: str):
    if view not in VIEWS:
        raise ArgumentError(f"view must be one of {VIEWS}, got {view!r}")
    ray = volume_or_grid.axis(_RAY_ROLE[view])
    rows = volume_or_grid.axis("axial")
    cols = ({0, 1, 2} - {ray, rows}).pop()
    return ray, rows, cols


def project_mean(volume: Volume, view: str, mask: np.ndarray,
                 empty_fill: float | None = None) -> np.ndarray:
    """Mean of masked voxels along the view's ray axis.

    Rays with no masked voxel output ``empty_fill`` (defaults to the
    clip-window minimum, i.e. air).
    """
    if mask.shape != volume.data.shape:
        raise ArgumentError("mask must share the volume grid")
    if empty_fill is None:
        empty_fill = float(DEFAULT_HU_WINDOW[0])
    ray, rows, cols = _project_axes(volume, view)
    data = volume.data.astype(np.float64, copy=False)
    sums = np.where(mask, data, 0.0).sum(axis=ray)
    counts = mask.sum(axis=ray)
    with np.errstate(invalid="ignore"):
        img = np.where(counts > 0, sums / np.maximum(counts, 1), empty_fill)
    # axis order after reduction: the two remaining volume axes, in order
    remaining = [a for a in range(3) if a != ray]
    img = np.moveaxis(img, remaining.index(rows), 0)
    return img


def _rescale_to_u8(img: np.ndarray) -> np.ndarray:
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return np.zeros(img.shape, dtype=np.uint8)
    scaled = (img - lo) / (hi - lo) * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def compose_drr(volume: Volume, cfg: ProjectionConfig = ProjectionConfig(),
                view: str = "frontal", source_id: str = "") -> Projection:
    """Full pseudo-radiograph pipeline for one view.

    Clip to the HU window, build the body mask, extract the bone
    compartment, sum body and bone with their weights, project the mean
    along the view axis, min-max rescale to 8 bits (a constant image
    maps to 0), optionally apply adaptive equalization, and finish with
    a Lanczos resize to the output size.
    """
    lo, hi = cfg.hu_window
    clipped = clip_hu(volume, lo, hi)
    body = body_mask(clipped)
    bone = bone_volume(clipped, body, cfg.ght, cfg.hu_window)
    weighted = (
        cfg.body_weight * np.where(body, clipped.data.astype(np.float64), lo)
        + cfg.bone_weight * bone
    )
    summed = Volume(weighted, volume.spacing, volume.orientation)
    fill = (cfg.body_weight + cfg.bone_weight) * lo  # below any body ray mean
    img = project_mean(summed, view, body, empty_fill=fill)
    img8 = _rescale_to_u8(img)
    equalized = cfg.equalize_for(view)
    if equalized:
        img8 = equalize_adaptive(img8, cfg.clahe_tiles, cfg.clahe_clip_limit)
    resized = resize_2d(img8.astype(np.float64), cfg.output_size, "lanczos")
    out = np.clip(np.rint(resized), 0, 255).astype(np.uint8)
    return Projection(out, view, source_id, equalized)


def project_masks(labels: LabelVolume, view: str,
                  output_size: tuple[int, int] | None = (512, 512),
                  source_id: str = "") -> MaskSet2D:
    """Max-project every class along the view's ray axis.

    The silhouette keeps any structure that appears anywhere along the
    ray; masks are then nearest-resized to the output size so they stay
    binary and aligned with the composed radiograph.
    """
    ray, rows, cols = _project_axes(labels.grid, view)
    out = {}
    for name in labels.classes:
        m = labels.masks[name].any(axis=ray)
        remaining = [a for a in range(3) if a != ray]
        m = np.moveaxis(m, remaining.index(rows), 0)
        if output_size is not None:
            m = resize_2d(m, output_size, "nearest")
        out[name] = m.astype(bool)
    return MaskSet2D(out, view, source_id)
