"""Rule-based anatomical regions derived from projected mask sets.

All rules operate rowwise on projections (row 0 = superior), the 2D
analogue of axial slices. Each split op returns a new mask set with the
derived classes appended; inputs are never modified, outputs of one
split partition its source mask exactly, and re-running a rule
reproduces identical masks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import taxonomy as tx
from .errors import ArgumentError, MissingDependencyError, ViewMismatchError
from .projection import MaskSet2D


@dataclass(frozen=True)
class RegionRuleConfig:
    bifurcation_offset_rows: int = 10
    lung_zone_fractions: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    apical_landmark: str = "inferior"  # clavicle margin: 'inferior' or 'superior'
    split_aorta: bool = True

    def __post_init__(self):
        if self.bifurcation_offset_rows < 0:
            raise ArgumentError("bifurcation offset must be >= 0")
        f = self.lung_zone_fractions
        if len(f) != 3 or any(x <= 0 for x in f) or abs(sum(f) - 1.0) > 1e-9:
            raise ArgumentError("lung zone fractions must be positive and sum to 1")
        if self.apical_landmark not in ("inferior", "superior"):
            raise ArgumentError("apical landmark must be 'inferior' or 'superior'")


def _require(masks: MaskSet2D, name: str) -> np.ndarray:
    if not masks.has(name):
        raise MissingDependencyError(name)
    return masks.mask(name).astype(bool)


def _require_view(masks: MaskSet2D, view: str):
    if masks.view != view:
        raise ViewMismatchError(view, masks.view)


def _occupied_rows(mask: np.ndarray) -> np.ndarray:
    return np.nonzero(mask.any(axis=1))[0]


def split_mediastinum_t4(masks: MaskSet2D) -> MaskSet2D:
    """Split the mediastinum at the inferior margin of the T4 vertebra.

    Rows at or above the bottom-most T4 row form the upper mediastinum,
    the rest the lower one.
    """
    medi = _require(masks, tx.MEDIASTINUM)
    t4 = _require(masks, tx.T4)
    cut = int(_occupied_rows(t4).max())
    upper = medi.copy()
    upper[cut + 1 :, :] = False
    lower = medi & ~upper
    return masks.with_masks({tx.MEDIASTINUM_UPPER: upper, tx.MEDIASTINUM_LOWER: lower})


def split_mediastinum_ant_post(masks: MaskSet2D) -> MaskSet2D:
    """Split the lower mediastinum at the heart's posterior boundary.

    Lateral view only; columns run anterior to posterior. Per row, the
    pixels up to the heart's last column are anterior, the remainder
    posterior; rows without heart are entirely posterior.
    """
    _require_view(masks, "lateral")
    medi = _require(masks, tx.MEDIASTINUM_LOWER)
    heart = _require(masks, tx.HEART)
    anterior = np.zeros_like(medi)
    cols = np.arange(medi.shape[1])
    for r in np.nonzero(heart.any(axis=1))[0]:
        boundary = int(np.nonzero(heart[r])[0].max())
        anterior[r] = medi[r] & (cols <= boundary)
    posterior = medi & ~anterior
    return masks.with_masks(
        {tx.MEDIASTINUM_ANTERIOR: anterior, tx.MEDIASTINUM_POSTERIOR: posterior}
    )


def _zone_rows(rows: np.ndarray, fractions) -> tuple[int, int, int, int]:
    r_top, r_bot = int(rows.min()), int(rows.max())
    height = r_bot - r_top + 1
    cut1 = r_top + math.ceil(height * fractions[0])
    cut2 = r_top + math.ceil(height * (fractions[0] + fractions[1]))
    return r_top, cut1, cut2, r_bot


def lung_zones(masks: MaskSet2D, cfg: RegionRuleConfig = RegionRuleConfig()) -> MaskSet2D:
    """Vertical-third lung zones per side, plus the clavicle-defined apical zone.

    The occupied row range of each lung is cut into upper/middle/lower
    thirds (a partition of the lung). The apical zone is the lung above
    the ipsilateral clavicle margin and overlaps the upper zone; when a
    clavicle class is absent the apical zone is skipped with a warning.
    """
    new = {}
    row_index = np.arange(masks.dims[0])[:, None]
    for side in ("left", "right"):
        lung = _require(masks, tx.lung(side))
        rows = _occupied_rows(lung)
        _, cut1, cut2, _ = _zone_rows(rows, cfg.lung_zone_fractions)
        new[tx.lung_zone(side, "upper")] = lung & (row_index < cut1)
        new[tx.lung_zone(side, "middle")] = lung & (row_index >= cut1) & (row_index < cut2)
        new[tx.lung_zone(side, "lower")] = lung & (row_index >= cut2)
        clav_name = tx.clavicle(side)
        if not masks.has(clav_name):
            warnings.warn(
                f"clavicle class {clav_name!r} absent; apical zone for "
                f"{side} lung skipped",
                stacklevel=2,
            )
            continue
        clav_rows = _occupied_rows(masks.mask(clav_name).astype(bool))
        landmark = (
            int(clav_rows.max()) if cfg.apical_landmark == "inferior"
            else int(clav_rows.min())
        )
        new[tx.lung_zone(side, "apical")] = lung & (row_index < landmark)
    return masks.with_masks(new)


def _row_run_count(row: np.ndarray) -> int:
    if not row.any():
        return 0
    r = row.astype(np.int8)
    return int(((np.diff(r) == 1).sum()) + r[0])


def tracheal_bifurcation(masks: MaskSet2D,
                         cfg: RegionRuleConfig = RegionRuleConfig()) -> MaskSet2D:
    """Airway region starting a fixed offset above the tracheal split.

    The split row is the first row from which every row down to the
    mask bottom shows at least two separate runs (branches); speckle
    rows that merge again below do not count. No split yields an empty
    region class.
    """
    trachea = _require(masks, tx.TRACHEA)
    rows = _occupied_rows(trachea)
    r_bot = int(rows.max())
    split_row = None
    for r in range(r_bot, int(rows.min()) - 1, -1):
        if _row_run_count(trachea[r]) >= 2:
            split_row = r
        else:
            break
    region = np.zeros_like(trachea)
    if split_row is not None:
        start = max(0, split_row - cfg.bifurcation_offset_rows)
        region[start:, :] = trachea[start:, :]
    return masks.with_masks({"tracheal_bifurcation": region})


def hemidiaphragm_split(masks: MaskSet2D) -> MaskSet2D:
    """Split the sub-diaphragm at its bounding-box center column.

    Frontal view only. Low columns are the patient's right side.
    """
    _require_view(masks, "frontal")
    sub = _require(masks, tx.SUB_DIAPHRAGM)
    cols = np.nonzero(sub.any(axis=0))[0]
    c_min, c_max = int(cols.min()), int(cols.max())
    width = c_max - c_min + 1
    cut = c_min + math.ceil(width / 2) - 1
    col_index = np.arange(sub.shape[1])[None, :]
    right = sub & (col_index <= cut)
    left = sub & ~right
    return masks.with_masks(
        {tx.hemidiaphragm("left"): left, tx.hemidiaphragm("right"): right}
    )


def split_aorta(masks: MaskSet2D) -> MaskSet2D:
    """Arch / ascending / descending aorta partition.

    Substitute rule: the arch is the aorta within the rows at or above
    the inferior T4 margin; the remainder splits at the arch's center
    column (low columns ascending, high columns descending).
    """
    aorta = _require(masks, tx.AORTA)
    t4 = _require(masks, tx.T4)
    cut_row = int(_occupied_rows(t4).max())
    row_index = np.arange(aorta.shape[0])[:, None]
    arch = aorta & (row_index <= cut_row)
    rest = aorta & ~arch
    arch_cols = np.nonzero(arch.any(axis=0))[0]
    if arch_cols.size:
        center = int(round(float(arch_cols.mean())))
    else:
        rest_cols = np.nonzero(rest.any(axis=0))[0]
        center = int(round(float(rest_cols.mean()))) if rest_cols.size else 0
    col_index = np.arange(aorta.shape[1])[None, :]
    ascending = rest & (col_index <= center)
    descending = rest & ~ascending
    return masks.with_masks(
        {
            "aortic_arch": arch,
            "aorta_ascending": ascending,
            "aorta_descending": descending,
        }
    )


# rule name -> (callable, takes config, required view or None)
_RULES = (
    ("mediastinum_t4", split_mediastinum_t4, False, None),
    ("mediastinum_ant_post", split_mediastinum_ant_post, False, "lateral"),
    ("lung_zones", lung_zones, True, None),
    ("tracheal_bifurcation", tracheal_bifurcation, True, None),
    ("hemidiaphragm", hemidiaphragm_split, False, "frontal"),
    ("aorta", split_aorta, False, None),
)


def derive_regions(masks: MaskSet2D,
                   cfg: RegionRuleConfig = RegionRuleConfig()) -> tuple[MaskSet2D, list]:
    """Apply every applicable region rule.

    Rules whose required classes are missing are skipped and reported;
    view-specific rules are skipped silently on the other view. Returns
    the augmented mask set and the list of warnings.
    """
    notes = []
    out = masks
    for name, fn, takes_cfg, view in _RULES:
        if view is not None and masks.view != view:
            continue
        if name == "aorta" and not cfg.split_aorta:
            continue
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                out = fn(out, cfg) if takes_cfg else fn(out)
            notes.extend(str(w.message) for w in caught)
        except MissingDependencyError as e:
            notes.append(f"rule {name!r} skipped: {e}")
    return out, notes
