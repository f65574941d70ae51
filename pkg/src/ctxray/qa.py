"""Cohort-statistics plausibility filtering of projected mask sets.

Per-class area and centroid statistics are learned from a cohort; a
mask set is then scored by z-scores against those statistics, and hard
anatomical rules (enough rib pairs) decide whether the image as a whole
is kept. Class-level deviations are reported and only fail the image
when configured to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import taxonomy as tx
from .errors import InsufficientCohortError
from .imgops import connected_components
from .projection import MaskSet2D


@dataclass(frozen=True)
class ClassStat:
    """Moments of one class over the cohort images where it is present."""

    n: int
    presence: float
    area_mean: float = 0.0
    area_std: float = 0.0
    cx_mean: float = 0.0
    cx_std: float = 0.0
    cy_mean: float = 0.0
    cy_std: float = 0.0
    components_mean: float = 0.0


@dataclass(frozen=True)
class ClassStats:
    per_class: dict

    def to_json(self) -> str:
        payload = {name: vars(stat) for name, stat in sorted(self.per_class.items())}
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ClassStats":
        data = json.loads(text)
        return cls({name: ClassStat(**fields) for name, fields in data.items()})


@dataclass
class ClassReport:
    verdict: str  # pass | warn | fail
    z_area: float | None = None
    z_cx: float | None = None
    z_cy: float | None = None
    components: int = 0
    notes: list = field(default_factory=list)


@dataclass
class PlausibilityReport:
    source_id: str
    verdict: str  # pass | fail
    failed_rules: list
    rib_pairs: int
    classes: dict

    def to_json(self) -> str:
        payload = {
            "source_id": self.source_id,
            "verdict": self.verdict,
            "failed_rules": self.failed_rules,
            "rib_pairs": self.rib_pairs,
            "classes": {
                name: {
                    "verdict": c.verdict,
                    "z_area": c.z_area,
                    "z_cx": c.z_cx,
                    "z_cy": c.z_cy,
                    "components": c.components,
                    "notes": c.notes,
                }
                for name, c in sorted(self.classes.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _class_features(mask: np.ndarray):
    """(normalized area, normalized centroid x, normalized centroid y)."""
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    area = xs.size / (h * w)
    return area, float(xs.mean()) / w, float(ys.mean()) / h


def count_rib_pairs(masks: MaskSet2D) -> int:
    """Distinct rib levels present on both sides.

    Posterior rib classes count when present; whole-rib classes stand in
    for cohorts that do not split posterior/anterior parts.
    """
    levels = {"left": set(), "right": set()}
    for name in masks.classes:
        parsed = tx.parse_rib(name)
        if parsed is None:
            continue
        part, side, index = parsed
        if part == "anterior":
            continue
        if masks.has(name):
            levels[side].add(index)
    return len(levels["left"] & levels["right"])


def compute_class_stats(cohort: list) -> ClassStats:
    """Per-class mean/std of normalized area and centroid over the cohort.

    Presence frequency counts all images; the moments only the images
    where the class is non-empty, and are reported once at least two
    such samples exist.
    """
    if len(cohort) < 2:
        raise InsufficientCohortError(
            f"cohort statistics need >= 2 mask sets, got {len(cohort)}"
        )
    names = sorted({name for ms in cohort for name in ms.classes})
    per_class = {}
    for name in names:
        feats = []
        comps = []
        for ms in cohort:
            if not ms.has(name):
                continue
            feats.append(_class_features(ms.mask(name)))
            _, sizes = connected_components(ms.mask(name).astype(bool))
            comps.append(len(sizes))
        presence = len(feats) / len(cohort)
        if len(feats) < 2:
            per_class[name] = ClassStat(n=len(feats), presence=presence)
            continue
        arr = np.array(feats)
        per_class[name] = ClassStat(
            n=len(feats),
            presence=presence,
            area_mean=float(arr[:, 0].mean()),
            area_std=float(arr[:, 0].std(ddof=1)),
            cx_mean=float(arr[:, 1].mean()),
            cx_std=float(arr[:, 1].std(ddof=1)),
            cy_mean=float(arr[:, 2].mean()),
            cy_std=float(arr[:, 2].std(ddof=1)),
            components_mean=float(np.mean(comps)),
        )
    return ClassStats(per_class)


# spreads below this are summation noise from averaging identical values,
# not real cohort variance; features live in [0, 1] so the scales are fixed
_STD_FLOOR = 1e-12
_EQ_TOL = 1e-9


def _zscore(value: float, mean: float, std: float) -> float:
    if std > _STD_FLOOR:
        return abs(value - mean) / std
    return 0.0 if abs(value - mean) <= _EQ_TOL else math.inf


def plausibility_check(
    masks: MaskSet2D,
    stats: ClassStats,
    z_max: float = 3.0,
    min_rib_pairs: int = 9,
    fail_on_class_deviation: bool = False,
) -> PlausibilityReport:
    """Score one mask set against cohort statistics.

    A class fails when any of its area / centroid z-scores exceeds
    ``z_max`` (zero-spread statistics compare by exact equality) and
    warns when a single-organ class shows several components. The image
    verdict is driven by hard rules: too few rib pairs always fails,
    class-level deviations only when ``fail_on_class_deviation`` is set.
    """
    class_reports = {}
    deviating = []
    for name in masks.classes:
        stat = stats.per_class.get(name)
        mask = masks.mask(name).astype(bool)
        if not mask.any():
            class_reports[name] = ClassReport(verdict="pass", notes=["empty"])
            continue
        _, sizes = connected_components(mask)
        report = ClassReport(verdict="pass", components=len(sizes))
        if stat is not None and stat.n >= 2:
            area, cx, cy = _class_features(mask)
            report.z_area = _zscore(area, stat.area_mean, stat.area_std)
            report.z_cx = _zscore(cx, stat.cx_mean, stat.cx_std)
            report.z_cy = _zscore(cy, stat.cy_mean, stat.cy_std)
            failures = []
            if report.z_area > z_max:
                failures.append("area-z")
            if report.z_cx > z_max or report.z_cy > z_max:
                failures.append("centroid-z")
            if failures:
                report.verdict = "fail"
                report.notes.extend(failures)
                deviating.extend(failures)
            if round(stat.components_mean) == 1 and len(sizes) > 1:
                if report.verdict == "pass":
                    report.verdict = "warn"
                report.notes.append("multiple-components")
        class_reports[name] = report

    failed_rules = []
    rib_pairs = count_rib_pairs(masks)
    if rib_pairs < min_rib_pairs:
        failed_rules.append("rib_count")
    failed_rules.extend(sorted(set(deviating)))
    hard_fail = "rib_count" in failed_rules or (
        fail_on_class_deviation and deviating
    )
    return PlausibilityReport(
        source_id=masks.source_id,
        verdict="fail" if hard_fail else "pass",
        failed_rules=failed_rules,
        rib_pairs=rib_pairs,
        classes=class_reports,
    )
