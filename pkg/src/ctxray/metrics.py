"""Segmentation scores, distribution distance and cohort statistics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.spatial import cKDTree

from .errors import (
    ArgumentError,
    DegenerateSampleError,
    NumericDomainError,
    UndefinedMetricError,
)
from .projection import MaskSet2D


def iou_dice(a: np.ndarray, b: np.ndarray):
    """(intersection-over-union, dice); (None, None) when both are empty."""
    if a.shape != b.shape:
        raise ArgumentError(f"mask dims differ: {a.shape} vs {b.shape}")
    a = a.astype(bool)
    b = b.astype(bool)
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return None, None
    return inter / union, 2 * inter / (int(a.sum()) + int(b.sum()))


def boundary_points(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a background 4-neighbor (image border counts)."""
    m = mask.astype(bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return np.argwhere(m & ~interior).astype(np.float64)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between boundary pixel sets (Euclidean)."""
    if a.shape != b.shape:
        raise ArgumentError(f"mask dims differ: {a.shape} vs {b.shape}")
    pa = boundary_points(a)
    pb = boundary_points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise UndefinedMetricError("Hausdorff distance needs two non-empty masks")
    d_ab = cKDTree(pb).query(pa)[0].max()
    d_ba = cKDTree(pa).query(pb)[0].max()
    return float(max(d_ab, d_ba))


@dataclass(frozen=True)
class FeatureStats:
    """Gaussian moments of two feature populations."""

    mu: np.ndarray
    sigma: np.ndarray
    mu_w: np.ndarray
    sigma_w: np.ndarray

    def __post_init__(self):
        for name in ("sigma", "sigma_w"):
            s = np.atleast_2d(np.asarray(getattr(self, name), dtype=np.float64))
            if s.shape[0] != s.shape[1]:
                raise ArgumentError(f"{name} must be square")
            if np.max(np.abs(s - s.T)) > 1e-9:
                raise ArgumentError(f"{name} must be symmetric within 1e-9")
            object.__setattr__(self, name, 0.5 * (s + s.T))
        for name in ("mu", "mu_w"):
            object.__setattr__(
                self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            )
        if self.mu.shape != self.mu_w.shape or self.sigma.shape != self.sigma_w.shape:
            raise ArgumentError("feature dimensions of the two populations differ")
        if self.mu.shape[0] != self.sigma.shape[0]:
            raise ArgumentError("mean and covariance dimensions differ")


def feature_stats(features_a: np.ndarray, features_b: np.ndarray) -> FeatureStats:
    """Estimate Gaussian moments from two (samples x dims) feature matrices."""
    a = np.atleast_2d(np.asarray(features_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(features_b, dtype=np.float64))
    return FeatureStats(
        mu=a.mean(axis=0),
        sigma=np.atleast_2d(np.cov(a, rowvar=False)),
        mu_w=b.mean(axis=0),
        sigma_w=np.atleast_2d(np.cov(b, rowvar=False)),
    )


def _psd_sqrt(matrix: np.ndarray, name: str) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals.min() < -1e-8:
        raise NumericDomainError(
            f"{name} has eigenvalue {eigvals.min():.3e} below -1e-8; not PSD"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(stats: FeatureStats) -> float:
    """Fréchet distance between the two Gaussians.

    |mu - mu_w|^2 + tr(sigma + sigma_w - 2 (sigma sigma_w)^{1/2}); the
    cross term is evaluated as tr((sigma^{1/2} sigma_w sigma^{1/2})^{1/2})
    via symmetric eigendecompositions, since the raw product is not
    symmetric. Tiny negative results (>= -1e-6) clamp to zero.
    """
    root = _psd_sqrt(stats.sigma, "sigma")
    inner = root @ stats.sigma_w @ root
    inner = 0.5 * (inner + inner.T)
    cross = _psd_sqrt(inner, "sigma^(1/2) sigma_w sigma^(1/2)")
    diff = stats.mu - stats.mu_w
    value = float(
        diff @ diff
        + np.trace(stats.sigma)
        + np.trace(stats.sigma_w)
        - 2.0 * np.trace(cross)
    )
    if value < -1e-6:
        raise NumericDomainError(f"Fréchet distance {value:.3e} below -1e-6")
    return max(value, 0.0)


def t_test(values_pos, values_neg, method: str = "welch"):
    """Two-sample t statistic and two-sided p-value.

    Welch's unequal-variance form by default (Welch-Satterthwaite
    degrees of freedom); ``method='student'`` pools the variances.
    """
    x = np.asarray(values_pos, dtype=np.float64)
    y = np.asarray(values_neg, dtype=np.float64)
    if len(x) < 2 or len(y) < 2:
        raise ArgumentError("both groups need at least 2 samples")
    vx, vy = x.var(ddof=1), y.var(ddof=1)
    nx, ny = len(x), len(y)
    if method == "welch":
        se2 = vx / nx + vy / ny
        if se2 <= 0:
            raise DegenerateSampleError("both groups have zero variance")
        t = (x.mean() - y.mean()) / math.sqrt(se2)
        df = se2**2 / ((vx / nx) ** 2 / (nx - 1) + (vy / ny) ** 2 / (ny - 1))
    elif method == "student":
        pooled = ((nx - 1) * vx + (ny - 1) * vy) / (nx + ny - 2)
        if pooled <= 0:
            raise DegenerateSampleError("pooled variance is zero")
        t = (x.mean() - y.mean()) / math.sqrt(pooled * (1 / nx + 1 / ny))
        df = nx + ny - 2
    else:
        raise ArgumentError(f"method must be 'welch' or 'student', got {method!r}")
    p = 2.0 * float(sps.t.sf(abs(t), df))
    return float(t), min(p, 1.0)


def roc_auc(scores, labels):
    """ROC curve points and area under it.

    The curve runs over the unique score thresholds (descending); the
    trapezoidal area equals the Mann-Whitney concordance probability,
    with tied scores contributing one half.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ArgumentError("scores and labels must be equal-length 1D sequences")
    pos = int(np.count_nonzero(y == 1))
    neg = int(np.count_nonzero(y == 0))
    if pos + neg != len(y):
        raise ArgumentError("labels must be binary (0/1)")
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("ROC needs both label values present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # cumulate at the unique-threshold block ends
    block_end = np.nonzero(np.diff(s_sorted))[0]
    block_end = np.concatenate([block_end, [len(s_sorted) - 1]])
    tp = np.cumsum(y_sorted == 1)[block_end].astype(np.int64)
    fp = np.cumsum(y_sorted == 0)[block_end].astype(np.int64)
    tp = np.concatenate([[0], tp])
    fp = np.concatenate([[0], fp])
    area = 0.0
    for k in range(1, len(tp)):
        area += (fp[k] - fp[k - 1]) * (tp[k] + tp[k - 1]) / 2.0
    auc = area / (pos * neg)
    curve = [(f / neg, t / pos) for f, t in zip(fp, tp)]
    return curve, float(auc)


@dataclass(frozen=True)
class SegScore:
    """Per-class overlap and boundary scores plus means over defined classes."""

    per_class: dict
    mean_iou: float | None
    mean_dice: float | None
    mean_hausdorff: float | None
    undefined: tuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "per_class": {k: dict(v) for k, v in sorted(self.per_class.items())},
                "mean_iou": self.mean_iou,
                "mean_dice": self.mean_dice,
                "mean_hausdorff": self.mean_hausdorff,
                "undefined": sorted(self.undefined),
            },
            indent=2,
            sort_keys=True,
        )


def evaluate_masksets(pred: MaskSet2D, gt: MaskSet2D) -> SegScore:
    """Per-class IoU / dice / Hausdorff between aligned mask sets.

    Classes empty in both sets contribute no overlap score; classes
    empty in either contribute no Hausdorff. Means run over the defined
    values only.
    """
    if pred.dims != gt.dims:
        raise ArgumentError(f"mask dims differ: {pred.dims} vs {gt.dims}")
    missing = sorted(set(pred.classes) ^ set(gt.classes))
    if missing:
        raise ArgumentError(
            "taxonomy mismatch; classes not shared: " + ", ".join(missing)
        )
    per_class = {}
    undefined = []
    ious, dices, hds = [], [], []
    for name in gt.classes:
        p = pred.mask(name).astype(bool)
        g = gt.mask(name).astype(bool)
        iou, dice = iou_dice(p, g)
        hd = None
        if p.any() and g.any():
            hd = hausdorff(p, g)
            hds.append(hd)
        if iou is None:
            undefined.append(name)
        else:
            ious.append(iou)
            dices.append(dice)
        per_class[name] = {"iou": iou, "dice": dice, "hausdorff": hd}
    return SegScore(
        per_class=per_class,
        mean_iou=float(np.mean(ious)) if ious else None,
        mean_dice=float(np.mean(dices)) if dices else None,
        mean_hausdorff=float(np.mean(hds)) if hds else None,
        undefined=tuple(undefined),
    )


@dataclass
class CohortTable:
    """Per-image biomarker values with binary labels and group metadata."""

    rows: list = field(default_factory=list)  # (source_id, value, label, sex, age_group)

    def add(self, source_id, value, label, sex="", age_group=""):
        self.rows.append((source_id, float(value), int(label), sex, age_group))

    def values(self, label: int) -> np.ndarray:
        return np.array([v for _, v, l, _, _ in self.rows if l == label])

    def scores_and_labels(self):
        return (
            np.array([v for _, v, _, _, _ in self.rows]),
            np.array([l for _, _, l, _, _ in self.rows]),
        )

    def group_summary(self):
        """Mean/std/count per (sex, age_group, label), for violin-style plots."""
        groups = {}
        for _, value, label, sex, age in self.rows:
            groups.setdefault((sex, age, label), []).append(value)
        return {
            key: {
                "n": len(vals),
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
            }
            for key, vals in sorted(groups.items())
        }
