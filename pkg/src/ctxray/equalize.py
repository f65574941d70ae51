"""Contrast-limited adaptive histogram equalization for 8-bit images."""

from __future__ import annotations

import math

import numpy as np

from .errors import ArgumentError

_LEVELS = 256


def _tile_mapping(hist: np.ndarray, clip_limit: float) -> np.ndarray:
    """Per-tile value mapping (float LUT over 0..255).

    Histogram bins above the clip limit are trimmed and the excess is
    redistributed uniformly, remainder to the lowest bins, so the total
    count is preserved. A tile with a single gray level maps to itself.
    """
    area = int(hist.sum())
    if np.count_nonzero(hist) <= 1:
        return np.arange(_LEVELS, dtype=np.float64)
    if math.isfinite(clip_limit):
        limit = max(1, int(clip_limit * area / _LEVELS))
        clipped = np.minimum(hist, limit)
        excess = area - int(clipped.sum())
        clipped = clipped + excess // _LEVELS
        clipped[: excess % _LEVELS] += 1
        hist = clipped
    cdf = np.cumsum(hist)
    nonzero = np.nonzero(hist)[0]
    cdf_min = int(cdf[nonzero[0]]) if nonzero.size else 0
    if area <= cdf_min:
        return np.arange(_LEVELS, dtype=np.float64)
    return (cdf - cdf_min) / (area - cdf_min) * 255.0


def equalize_adaptive(
    image: np.ndarray,
    tiles: tuple[int, int] = (8, 8),
    clip_limit: float = 4.0,
) -> np.ndarray:
    """CLAHE: clipped per-tile histograms, bilinear blend of tile mappings.

    ``tiles`` is (tiles along x, tiles along y); ``clip_limit`` is the
    histogram ceiling as a multiple of the uniform bin height
    (``inf`` disables clipping). Input and output are 8-bit grayscale.
    """
    if image.ndim != 2:
        raise ArgumentError(f"expected 2D image, got shape {image.shape}")
    tx, ty = int(tiles[0]), int(tiles[1])
    if tx < 1 or ty < 1:
        raise ArgumentError(f"tiles must be >= (1, 1), got {tiles}")
    if clip_limit <= 0:
        raise ArgumentError(f"clip_limit must be positive, got {clip_limit}")

    img = np.asarray(image)
    h, w = img.shape
    th, tw = math.ceil(h / ty), math.ceil(w / tx)
    pad_r, pad_c = ty * th - h, tx * tw - w
    padded = np.pad(img, ((0, pad_r), (0, pad_c)), mode="edge")

    luts = np.empty((ty, tx, _LEVELS), dtype=np.float64)
    for i in range(ty):
        for j in range(tx):
            tile = padded[i * th : (i + 1) * th, j * tw : (j + 1) * tw]
            hist = np.bincount(tile.ravel().astype(np.int64), minlength=_LEVELS)
            luts[i, j] = _tile_mapping(hist, clip_limit)

    rows = np.arange(h, dtype=np.float64)
    cols = np.arange(w, dtype=np.float64)
    fy = (rows + 0.5) / th - 0.5
    fx = (cols + 0.5) / tw - 0.5
    i0 = np.clip(np.floor(fy).astype(int), 0, ty - 1)
    j0 = np.clip(np.floor(fx).astype(int), 0, tx - 1)
    i1 = np.minimum(i0 + 1, ty - 1)
    j1 = np.minimum(j0 + 1, tx - 1)
    wy = np.clip(fy - i0, 0.0, 1.0)[:, None]
    wx = np.clip(fx - j0, 0.0, 1.0)[None, :]

    v = img.astype(np.int64)
    m00 = luts[i0[:, None], j0[None, :], v]
    m01 = luts[i0[:, None], j1[None, :], v]
    m10 = luts[i1[:, None], j0[None, :], v]
    m11 = luts[i1[:, None], j1[None, :], v]
    out = (1 - wy) * ((1 - wx) * m00 + wx * m01) + wy * ((1 - wx) * m10 + wx * m11)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
