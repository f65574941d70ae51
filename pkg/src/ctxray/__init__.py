"""ctxray: pseudo-radiographs and projected anatomy from thoracic CT.

The library turns CT volumes plus overlapping anatomical label volumes
into frontal/lateral pseudo-radiographs with aligned 2D mask sets,
derives rule-based regions, filters implausible mask sets against
cohort statistics, extracts explainable biomarkers and evaluates
segmentations and cohorts.
"""

__version__ = "0.1.0"

from .biomarkers import BiomarkerRecord, centroid, ctr, extract_biomarkers, scd
from .config import PipelineConfig, QaConfig
from .equalize import equalize_adaptive
from .imgops import (
    GhtParams,
    Histogram,
    ball_structure,
    connected_components,
    fill_holes_slicewise,
    ght_threshold,
    histogram_from_values,
    largest_component,
    morph,
    threshold,
)
from .maskio import (
    decode_rle,
    encode_rle,
    export_mask_pngs,
    load_labelvolume,
    load_maskset,
    load_png,
    save_labelvolume,
    save_maskset,
    save_png,
)
from .metrics import (
    CohortTable,
    FeatureStats,
    SegScore,
    evaluate_masksets,
    feature_stats,
    frechet_distance,
    hausdorff,
    iou_dice,
    roc_auc,
    t_test,
)
from .phantom import (
    PhantomSpec,
    enlarged_heart_variant,
    generate_phantom,
    save_phantom,
    scoliosis_variant,
)
from .projection import (
    MaskSet2D,
    Projection,
    ProjectionConfig,
    body_mask,
    bone_volume,
    compose_drr,
    project_masks,
    project_mean,
)
from .qa import ClassStats, PlausibilityReport, compute_class_stats, plausibility_check
from .regions import (
    RegionRuleConfig,
    derive_regions,
    hemidiaphragm_split,
    lung_zones,
    split_aorta,
    split_mediastinum_ant_post,
    split_mediastinum_t4,
    tracheal_bifurcation,
)
from .resample import resize_2d
from .volume import (
    DEFAULT_HU_WINDOW,
    GridSpec,
    LabelVolume,
    Volume,
    clip_hu,
    load_volume,
    save_volume,
)

__all__ = [name for name in dir() if not name.startswith("_")]
