"""Anatomy class-name conventions used by mask sets.

Class names are lower_snake strings. Side-split classes end in
``_left`` / ``_right`` or carry the side before a trailing index
(``rib_left_4``). These helpers centralise the name parsing so the
region rules, QA filter and biomarkers agree on the taxonomy.
"""

from __future__ import annotations

import re

VERTEBRA_LEVELS = (
    [f"C{i}" for i in range(1, 8)]
    + [f"T{i}" for i in range(1, 13)]
    + [f"L{i}" for i in range(1, 6)]
)

VERTEBRA_CLASSES = tuple(f"vertebrae_{lvl}" for lvl in VERTEBRA_LEVELS)

BODY = "body"
HEART = "heart"
AORTA = "aorta"
TRACHEA = "trachea"
MEDIASTINUM = "mediastinum"
MEDIASTINUM_UPPER = "mediastinum_upper"
MEDIASTINUM_LOWER = "mediastinum_lower"
MEDIASTINUM_ANTERIOR = "mediastinum_anterior"
MEDIASTINUM_POSTERIOR = "mediastinum_posterior"
SUB_DIAPHRAGM = "sub_diaphragm"
T4 = "vertebrae_T4"

_RIB_RE = re.compile(r"^rib(?:_(posterior|anterior))?_(left|right)_(\d+)$")


def lung(side: str) -> str:
    return f"lung_{side}"


def clavicle(side: str) -> str:
    return f"clavicle_{side}"


def rib(side: str, index: int) -> str:
    return f"rib_{side}_{index}"


def lung_zone(side: str, zone: str) -> str:
    """Zone in {upper, middle, lower, apical}."""
    return f"lung_{side}_zone_{zone}"


def hemidiaphragm(side: str) -> str:
    return f"hemidiaphragm_{side}"


def is_vertebra(name: str) -> bool:
    return name in VERTEBRA_CLASSES


def vertebra_order(name: str) -> int:
    """Superior-to-inferior sort key for vertebra class names."""
    return VERTEBRA_CLASSES.index(name)


def parse_rib(name: str):
    """Return (part, side, index) for rib class names, else None.

    ``part`` is 'posterior', 'anterior' or None for whole-rib classes.
    """
    m = _RIB_RE.match(name)
    if m is None:
        return None
    part, side, index = m.groups()
    return part, side, int(index)
