"""Binary image operations: thresholding, components, hole fill, morphology.

Masks are plain boolean numpy arrays (2D or 3D); the surrounding data
types carry grid geometry where it matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ArgumentError, DegenerateInputError
from .volume import Volume


@dataclass(frozen=True)
class Histogram:
    """Counts over contiguous bins; ``edges`` has one more entry than ``counts``."""

    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.float64)
        if edges.ndim != 1 or counts.ndim != 1 or len(edges) != len(counts) + 1:
            raise ArgumentError("histogram needs len(edges) == len(counts) + 1")
        if np.any(counts < 0):
            raise ArgumentError("histogram counts must be non-negative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass(frozen=True)
class GhtParams:
    """Prior strengths of the generalized histogram thresholding objective.

    ``nu`` scales the variance prior with scale ``tau``; ``kappa`` and
    ``omega`` weight the mixture prior. The default ``nu = inf`` is the
    documented limit in which the objective reduces to Otsu's
    between-class variance criterion; it is computed analytically in
    that case so the result matches classic Otsu exactly.
    """

    nu: float = math.inf
    tau: float = 0.1
    kappa: float = 0.0
    omega: float = 0.5

    def __post_init__(self):
        if self.nu < 0 or self.tau < 0 or self.kappa < 0:
            raise ArgumentError("nu, tau, kappa must be non-negative")
        if not 0.0 <= self.omega <= 1.0:
            raise ArgumentError("omega must lie in [0, 1]")

    @property
    def otsu_mode(self) -> bool:
        return math.isinf(self.nu)


def histogram_from_values(values: np.ndarray, lo: float, hi: float) -> Histogram:
    """One bin per integer HU over [lo, hi]; values are rounded into range."""
    lo_i, hi_i = int(math.floor(lo)), int(math.ceil(hi))
    v = np.clip(np.rint(np.asarray(values)).astype(np.int64), lo_i, hi_i)
    counts = np.bincount(v.ravel() - lo_i, minlength=hi_i - lo_i + 1)
    edges = np.arange(lo_i, hi_i + 2, dtype=np.float64) - 0.5
    return Histogram(edges, counts)


def threshold(volume: Volume, t: float, sense: str = "ge") -> np.ndarray:
    """Binary mask of voxels >= t (sense 'ge') or <= t (sense 'le')."""
    if sense == "ge":
        return volume.data >= t
    if sense == "le":
        return volume.data <= t
    raise ArgumentError(f"sense must be 'ge' or 'le', got {sense!r}")


def _ght_cut_index(counts, centers, params: GhtParams) -> int:
    """Index t of the best cut (left side = bins 0..t), ties to lowest t."""
    n = counts.astype(np.float64)
    x = centers.astype(np.float64)
    total = n.sum()
    w0 = np.cumsum(n)[:-1]
    w1 = total - w0
    s0 = np.cumsum(n * x)[:-1]
    s1 = (n * x).sum() - s0

    if params.otsu_mode:
        valid = (w0 > 0) & (w1 > 0)
        if not valid.any():
            raise DegenerateInputError(
                "histogram needs mass in at least two bins for a threshold"
            )
        score = np.full(w0.shape, -np.inf)
        d = s0[valid] * w1[valid] - s1[valid] * w0[valid]
        score[valid] = d * d / (w0[valid] * w1[valid])
        return int(np.argmax(score))

    q0 = np.cumsum(n * x * x)[:-1]
    q1 = (n * x * x).sum() - q0
    w0c = np.clip(w0, 1e-30, None)
    w1c = np.clip(w1, 1e-30, None)
    d0 = np.clip(q0 - s0 * s0 / w0c, 0.0, None)
    d1 = np.clip(q1 - s1 * s1 / w1c, 0.0, None)
    p0 = w0c / total
    p1 = w1c / total
    nu, tau, kappa, omega = params.nu, params.tau, params.kappa, params.omega
    v0 = np.clip((p0 * nu * tau**2 + d0) / (p0 * nu + w0c), 1e-30, None)
    v1 = np.clip((p1 * nu * tau**2 + d1) / (p1 * nu + w1c), 1e-30, None)
    f0 = -d0 / v0 - w0c * np.log(v0) + 2.0 * (w0c + kappa * omega) * np.log(w0c)
    f1 = -d1 / v1 - w1c * np.log(v1) + 2.0 * (w1c + kappa * (1.0 - omega)) * np.log(w1c)
    return int(np.argmax(f0 + f1))


def ght_threshold(hist: Histogram, params: GhtParams = GhtParams()) -> float:
    """Threshold (a bin edge) maximizing the GHT objective.

    The returned edge separates the two classes: values at or above it
    belong to the upper class. With the default Otsu-limit parameters
    the cut maximizes between-class variance; ties break toward the
    lowest cut index.
    """
    if len(hist.counts) < 2:
        raise DegenerateInputError("single-bin histogram has no threshold")
    if hist.counts.sum() <= 0:
        raise DegenerateInputError("empty histogram has no threshold")
    t = _ght_cut_index(hist.counts, hist.centers, params)
    return float(hist.edges[t + 1])


_STRUCTURES = {
    ("face", 2): ndimage.generate_binary_structure(2, 1),
    ("full", 2): ndimage.generate_binary_structure(2, 2),
    ("face", 3): ndimage.generate_binary_structure(3, 1),
    ("full", 3): ndimage.generate_binary_structure(3, 3),
}


def connected_components(mask: np.ndarray, connectivity: str = "face"):
    """Label connected foreground regions.

    Returns ``(labels, sizes)`` where labels are 1..N in first-touch
    scan order and ``sizes[k]`` is the voxel count of component k+1.
    """
    key = (connectivity, mask.ndim)
    if key not in _STRUCTURES:
        raise ArgumentError(
            f"connectivity must be 'face' or 'full' for 2D/3D masks, got {connectivity!r}"
        )
    labels, count = ndimage.label(mask, structure=_STRUCTURES[key])
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    return labels, sizes


def largest_component(mask: np.ndarray, connectivity: str = "face") -> np.ndarray:
    """Keep only the largest component (ties: lowest scan-order seed)."""
    labels, sizes = connected_components(mask, connectivity)
    if sizes.size == 0:
        return np.zeros_like(mask, dtype=bool)
    return labels == (int(np.argmax(sizes)) + 1)


def fill_holes_slicewise(mask: np.ndarray, axis: int = 2) -> np.ndarray:
    """Fill background regions not reaching the slice border, per slice."""
    if mask.ndim != 3:
        raise ArgumentError(f"expected a 3D mask, got shape {mask.shape}")
    if not 0 <= axis < 3:
        raise ArgumentError(f"axis {axis} invalid for a 3D mask")
    moved = np.moveaxis(mask, axis, 0)
    out = np.empty_like(moved, dtype=bool)
    for k in range(moved.shape[0]):
        out[k] = ndimage.binary_fill_holes(moved[k])
    return np.moveaxis(out, 0, axis)


def ball_structure(radius: float, ndim: int) -> np.ndarray:
    """Discrete Euclidean ball: offsets with squared norm <= radius**2."""
    r = int(math.floor(radius))
    axes = np.ogrid[tuple(slice(-r, r + 1) for _ in range(ndim))]
    return sum(a.astype(np.float64) ** 2 for a in axes) <= radius**2


def morph(mask: np.ndarray, op: str, radius: float) -> np.ndarray:
    """Binary morphology with a discrete-ball structuring element.

    Voxels outside the array count as background for both erosion and
    dilation, so the pair is dual under complement on padded domains.
    """
    if radius < 0:
        raise ArgumentError(f"radius must be >= 0, got {radius}")
    if radius < 1:
        if op in ("erode", "dilate", "open", "close"):
            return mask.astype(bool).copy()
        raise ArgumentError(f"unknown morphological op {op!r}")
    structure = ball_structure(radius, mask.ndim)
    if op == "erode":
        return ndimage.binary_erosion(mask, structure=structure)
    if op == "dilate":
        return ndimage.binary_dilation(mask, structure=structure)
    if op == "open":
        return ndimage.binary_dilation(
            ndimage.binary_erosion(mask, structure=structure), structure=structure
        )
    if op == "close":
        return ndimage.binary_erosion(
            ndimage.binary_dilation(mask, structure=structure), structure=structure
        )
    raise ArgumentError(f"unknown morphological op {op!r}")
