import math

import numpy as np
import pytest

from ctxray import taxonomy as tx
from ctxray.errors import InsufficientCohortError
from ctxray.projection import MaskSet2D
from ctxray.qa import (
    ClassStats,
    compute_class_stats,
    count_rib_pairs,
    plausibility_check,
)

SIZE = 100


def disc(cy, cx, r, size=SIZE):
    ys, xs = np.ogrid[:size, :size]
    return (ys - cy) ** 2 + (xs - cx) ** 2 <= r**2


def base_maskset(shift=(0, 0), rib_pairs=9, source_id="img"):
    dy, dx = shift
    masks = {"heart": disc(50 + dy, 50 + dx, 12)}
    for i in range(rib_pairs):
        row = 8 + i * 9
        masks[tx.rib("left", i + 1)] = _bar(row, 62, 90)
        masks[tx.rib("right", i + 1)] = _bar(row, 10, 38)
    return MaskSet2D(masks, "frontal", source_id)


def _bar(row, c0, c1):
    m = np.zeros((SIZE, SIZE), dtype=bool)
    m[row : row + 3, c0:c1] = True
    return m


class TestComputeClassStats:
    def test_identical_cohort_zero_spread(self):
        cohort = [base_maskset(source_id=f"i{k}") for k in range(5)]
        stats = compute_class_stats(cohort)
        heart = stats.per_class["heart"]
        assert heart.presence == 1.0
        assert heart.area_std == 0.0 and heart.cx_std == 0.0 and heart.cy_std == 0.0
        assert heart.components_mean == 1.0

    def test_hand_computed_mean_std(self):
        m1 = np.zeros((SIZE, SIZE), dtype=bool)
        m1[:10, :] = True  # area 0.10
        m2 = np.zeros((SIZE, SIZE), dtype=bool)
        m2[:20, :] = True  # area 0.20
        cohort = [MaskSet2D({"c": m1}, "frontal"), MaskSet2D({"c": m2}, "frontal")]
        stat = compute_class_stats(cohort).per_class["c"]
        assert stat.area_mean == pytest.approx(0.15)
        # sample std of {0.10, 0.20}: sqrt(((0.05)^2 + (0.05)^2) / 1)
        assert stat.area_std == pytest.approx(math.sqrt(2 * 0.05**2))

    def test_absent_class_reports_presence_zero(self):
        empty = np.zeros((SIZE, SIZE), dtype=bool)
        cohort = [
            MaskSet2D({"c": empty, "d": disc(50, 50, 5)}, "frontal") for _ in range(3)
        ]
        stat = compute_class_stats(cohort).per_class["c"]
        assert stat.presence == 0.0 and stat.n == 0

    def test_permutation_invariant(self):
        cohort = [base_maskset(shift=(k, -k), source_id=f"i{k}") for k in range(4)]
        a = compute_class_stats(cohort)
        b = compute_class_stats(cohort[::-1])
        assert a.to_json() == b.to_json()

    def test_small_cohort_rejected(self):
        with pytest.raises(InsufficientCohortError):
            compute_class_stats([base_maskset()])


class TestPlausibilityCheck:
    def make_stats(self, n=20):
        rng = np.random.default_rng(0)
        cohort = [
            base_maskset(shift=(int(rng.integers(-2, 3)), int(rng.integers(-2, 3))),
                         source_id=f"i{k}")
            for k in range(n)
        ]
        return cohort, compute_class_stats(cohort)

    def test_in_cohort_sample_passes(self):
        cohort, stats = self.make_stats()
        for ms in cohort:
            report = plausibility_check(ms, stats, z_max=3.0, min_rib_pairs=9)
            assert report.verdict == "pass"
            assert report.failed_rules == []

    def test_translated_heart_fails_centroid(self):
        cohort, stats = self.make_stats()
        bad = base_maskset(shift=(-35, -35), source_id="bad")
        report = plausibility_check(bad, stats, z_max=3.0, min_rib_pairs=9)
        assert "centroid-z" in report.failed_rules
        assert report.classes["heart"].verdict == "fail"
        # centroid deviations alone do not fail the image by default
        assert report.verdict == "pass"
        strict = plausibility_check(
            bad, stats, z_max=3.0, min_rib_pairs=9, fail_on_class_deviation=True
        )
        assert strict.verdict == "fail"

    def test_too_few_rib_pairs_fails_image(self):
        cohort, stats = self.make_stats()
        bad = base_maskset(rib_pairs=5, source_id="bad")
        report = plausibility_check(bad, stats, z_max=3.0, min_rib_pairs=9)
        assert report.verdict == "fail"
        assert "rib_count" in report.failed_rules
        assert report.rib_pairs == 5

    def test_monotone_leniency(self):
        cohort, stats = self.make_stats()
        candidate = base_maskset(shift=(-8, 4), source_id="edge")
        verdicts = []
        for z_max in (0.5, 1.0, 2.0, 4.0, 8.0, 100.0):
            report = plausibility_check(candidate, stats, z_max=z_max, min_rib_pairs=9)
            verdicts.append(len([r for r in report.failed_rules if r != "rib_count"]))
        assert verdicts == sorted(verdicts, reverse=True)

    def test_cohort_mean_configuration_passes(self):
        cohort = [base_maskset(source_id=f"i{k}") for k in range(10)]
        stats = compute_class_stats(cohort)
        for z_max in (1e-6, 0.1, 3.0):
            report = plausibility_check(base_maskset(), stats, z_max=z_max,
                                        min_rib_pairs=9)
            assert report.verdict == "pass" and report.failed_rules == []

    def test_multiple_components_warn(self):
        cohort, stats = self.make_stats()
        split = base_maskset(source_id="split")
        split.masks["heart"] = disc(30, 30, 8) | disc(70, 70, 8)
        report = plausibility_check(split, stats, z_max=100.0, min_rib_pairs=9)
        assert report.classes["heart"].verdict in ("warn", "fail")
        assert "multiple-components" in report.classes["heart"].notes


class TestRibCounting:
    def test_whole_rib_names(self):
        assert count_rib_pairs(base_maskset(rib_pairs=7)) == 7

    def test_posterior_names(self):
        masks = {}
        for i in range(4):
            masks[f"rib_posterior_left_{i + 1}"] = _bar(10 + 9 * i, 60, 90)
            masks[f"rib_posterior_right_{i + 1}"] = _bar(10 + 9 * i, 10, 40)
        masks["rib_anterior_left_1"] = _bar(60, 60, 90)  # anterior parts ignored
        assert count_rib_pairs(MaskSet2D(masks, "frontal")) == 4

    def test_one_sided_ribs_do_not_pair(self):
        masks = {tx.rib("left", 1): _bar(10, 60, 90)}
        assert count_rib_pairs(MaskSet2D(masks, "frontal")) == 0


def test_stats_json_roundtrip():
    cohort = [base_maskset(shift=(k, 0), source_id=f"i{k}") for k in range(3)]
    stats = compute_class_stats(cohort)
    back = ClassStats.from_json(stats.to_json())
    assert back.per_class.keys() == stats.per_class.keys()
    assert back.per_class["heart"] == stats.per_class["heart"]
