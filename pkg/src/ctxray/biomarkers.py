"""Explainable biomarkers from frontal mask sets.

The cardio-thoracic ratio compares the widest heart row extent with the
widest outer extent of the combined lung fields. The spine-center
distance fits a straight centerline through the vertebra centroids by
orthogonal (total) least squares and sums the perpendicular distances,
so lateral spinal displacement accumulates into a scalar score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import taxonomy as tx
from .errors import (
    DegenerateGeometryError,
    EmptyMaskError,
    InsufficientLandmarksError,
    MissingDependencyError,
    ViewMismatchError,
)
from .projection import MaskSet2D


@dataclass
class BiomarkerRecord:
    source_id: str
    ctr: float | None = None
    ctr_reason: str | None = None
    cardiac_width_px: int | None = None
    thoracic_width_px: int | None = None
    scd: float | None = None
    scd_normalized: float | None = None
    scd_reason: str | None = None
    vertebra_count: int = 0
    centerline: tuple | None = None  # (point_x, point_y, dir_x, dir_y)

    def row(self) -> dict:
        return {
            "source_id": self.source_id,
            "ctr": "" if self.ctr is None else f"{self.ctr:.6f}",
            "ctr_reason": self.ctr_reason or "",
            "cardiac_width_px": self.cardiac_width_px or "",
            "thoracic_width_px": self.thoracic_width_px or "",
            "scd": "" if self.scd is None else f"{self.scd:.6f}",
            "scd_normalized": (
                "" if self.scd_normalized is None else f"{self.scd_normalized:.8f}"
            ),
            "scd_reason": self.scd_reason or "",
            "vertebra_count": self.vertebra_count,
        }


CSV_FIELDS = list(BiomarkerRecord(source_id="").row())


def centroid(mask: np.ndarray) -> tuple[float, float]:
    """Mean (x, y) of the foreground pixels (x = column, y = row)."""
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise EmptyMaskError("centroid of an empty mask is undefined")
    return float(xs.mean()), float(ys.mean())


def _max_row_extent(mask: np.ndarray) -> int:
    """Widest per-row horizontal extent, in pixels (edge to edge, inclusive)."""
    best = 0
    for r in np.nonzero(mask.any(axis=1))[0]:
        cols = np.nonzero(mask[r])[0]
        best = max(best, int(cols.max()) - int(cols.min()) + 1)
    return best


def ctr(masks: MaskSet2D) -> tuple[float, int, int]:
    """Cardio-thoracic ratio; returns (ratio, cardiac px, thoracic px).

    Cardiac width is the widest row extent of the heart; thoracic width
    the widest outer-edge extent of the lung-field union.
    """
    if masks.view != "frontal":
        raise ViewMismatchError("frontal", masks.view)
    for name in (tx.HEART, tx.lung("left"), tx.lung("right")):
        if not masks.has(name):
            raise MissingDependencyError(name)
    cardiac = _max_row_extent(masks.mask(tx.HEART).astype(bool))
    lungs = masks.mask(tx.lung("left")).astype(bool) | masks.mask(
        tx.lung("right")
    ).astype(bool)
    thoracic = _max_row_extent(lungs)
    if thoracic == 0:
        raise DegenerateGeometryError("thoracic width is zero")
    return cardiac / thoracic, cardiac, thoracic


def fit_centerline(points: np.ndarray):
    """Orthogonal least-squares line through 2D points.

    Returns (center, direction) with the direction along the principal
    axis of the point scatter; distances perpendicular to it are the
    smallest achievable in the summed-squares sense.
    """
    center = points.mean(axis=0)
    centered = points - center
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    direction = eigvecs[:, int(np.argmax(eigvals))]
    return center, direction


def vertebra_centroids(masks: MaskSet2D) -> np.ndarray:
    """Centroids of all non-empty vertebra classes, superior first."""
    names = [n for n in masks.classes if tx.is_vertebra(n) and masks.has(n)]
    names.sort(key=tx.vertebra_order)
    return np.array([centroid(masks.mask(n).astype(bool)) for n in names])


def scd(masks: MaskSet2D) -> tuple[float, int, tuple]:
    """Spine-center distance; returns (sum px, vertebra count, centerline).

    Sum of perpendicular distances from every vertebra centroid to the
    total-least-squares centerline through them.
    """
    points = vertebra_centroids(masks)
    if len(points) < 2:
        raise InsufficientLandmarksError(
            f"centerline needs >= 2 vertebra centroids, got {len(points)}"
        )
    center, direction = fit_centerline(points)
    normal = np.array([-direction[1], direction[0]])
    distances = np.abs((points - center) @ normal)
    line = (float(center[0]), float(center[1]), float(direction[0]), float(direction[1]))
    return float(distances.sum()), len(points), line


def extract_biomarkers(masks: MaskSet2D) -> BiomarkerRecord:
    """All computable biomarkers; missing inputs leave explained nulls."""
    record = BiomarkerRecord(source_id=masks.source_id)
    try:
        record.ctr, record.cardiac_width_px, record.thoracic_width_px = ctr(masks)
    except (MissingDependencyError, ViewMismatchError) as e:
        record.ctr_reason = f"missing-dependency: {e}"
    except DegenerateGeometryError as e:
        record.ctr_reason = f"degenerate-geometry: {e}"
    try:
        value, count, line = scd(masks)
        record.scd = value
        record.vertebra_count = count
        record.centerline = line
        record.scd_normalized = value / masks.dims[0]
    except InsufficientLandmarksError as e:
        record.scd_reason = f"insufficient-landmarks: {e}"
        record.vertebra_count = len(vertebra_centroids(masks))
    return record


def write_biomarker_csv(records: list, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow(record.row())
