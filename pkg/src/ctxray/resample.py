"""2D resampling: separable Lanczos for images, nearest for masks."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError

LANCZOS_RADIUS = 3


def _lanczos_kernel(d, a):
    out = np.zeros_like(d)
    inside = np.abs(d) < a
    x = d[inside]
    out[inside] = np.sinc(x) * np.sinc(x / a)
    return out


def _lanczos_weights(n_src: int, n_dst: int):
    """Row-normalized weight matrix mapping n_src samples to n_dst.

    Sample centers align via the usual half-pixel convention. When
    downscaling, the kernel support widens by the scale factor so the
    filter keeps acting as a low-pass.
    """
    scale = n_src / n_dst
    support = LANCZOS_RADIUS * max(scale, 1.0)
    centers = (np.arange(n_dst) + 0.5) * scale - 0.5
    lo = np.floor(centers - support).astype(int)
    width = int(np.ceil(2 * support)) + 2
    idx = lo[:, None] + np.arange(width)[None, :]
    dist = (centers[:, None] - idx) / max(scale, 1.0)
    w = _lanczos_kernel(dist, float(LANCZOS_RADIUS))
    idx = np.clip(idx, 0, n_src - 1)  # edge replication
    w /= w.sum(axis=1, keepdims=True)
    return idx, w


def _resize_axis_lanczos(img, n_dst, axis):
    img = np.moveaxis(img, axis, 0)
    idx, w = _lanczos_weights(img.shape[0], n_dst)
    out = np.einsum("ok,ok...->o...", w, img[idx])
    return np.moveaxis(out, 0, axis)


def _nearest_indices(n_src: int, n_dst: int):
    scale = n_src / n_dst
    idx = np.floor((np.arange(n_dst) + 0.5) * scale).astype(int)
    return np.clip(idx, 0, n_src - 1)


def resize_2d(image: np.ndarray, target: tuple[int, int], kernel: str = "lanczos") -> np.ndarray:
    """Resize a 2D array to ``target`` = (width, height).

    ``lanczos`` applies a separable windowed-sinc filter (radius 3,
    weights renormalized to sum 1, edges replicated) and returns float64.
    ``nearest`` replicates samples exactly and preserves the input dtype,
    so binary masks stay binary.
    """
    if image.ndim != 2:
        raise ArgumentError(f"expected 2D image, got shape {image.shape}")
    w, h = int(target[0]), int(target[1])
    if w <= 0 or h <= 0:
        raise ArgumentError(f"target dims must be positive, got {target}")
    if kernel == "nearest":
        rows = _nearest_indices(image.shape[0], h)
        cols = _nearest_indices(image.shape[1], w)
        return image[np.ix_(rows, cols)]
    if kernel == "lanczos":
        out = image.astype(np.float64, copy=False)
        out = _resize_axis_lanczos(out, h, axis=0)
        out = _resize_axis_lanczos(out, w, axis=1)
        return out
    raise ArgumentError(f"unknown kernel {kernel!r}; use 'lanczos' or 'nearest'")
