"""Desk-to-field toolkit for lichenometry: photo rectification via colored
calibration targets, interactive graph-cut annotation, superpixel classifiers,
and per-thallus measurements in physical units.

Hue convention everywhere: 8-bit HSV with H on [0,180), S and V on [0,255].
"""

from .errors import (
    DegenerateGeometry,
    DetectionFailure,
    InvalidTrainingSet,
    LichenmeterError,
    ModelFailure,
    SpecInfeasible,
)
from .features import FeatureConfig, LabeledTable, build_table, extract_features
from .forest import ForestParams
from .grabcut import GrabcutParams, Stroke, init_trimap, refine, segment
from .imaging import HsvBounds, Raster, load_image, load_mask, save_mask, save_png
from .learners import TrainedModel, load_model, save_model, train_forest, train_svm
from .modelselect import (
    ConfusionCounts,
    SweepConfig,
    classify_image,
    cross_validate,
    mask_confusion,
    mcc,
    precision,
    run_sweep,
    select_best,
)
from .rectify import Homography, QuadDetection, TargetLayout, detect_targets, \
    estimate_homography, rectify_image, rectify_photo
from .regions import ThallusRecord, SceneStats, filter_small, measure_mask
from .slic import SLIC_GRID, SlicParams, SuperpixelMap, slic
from .svm import SvmParams
from .synthcorpus import SceneSpec, WarpSpec, difficulty_spec, generate, write_corpus

__version__ = "0.1.0"

__all__ = [
    "ConfusionCounts", "DegenerateGeometry", "DetectionFailure", "FeatureConfig",
    "ForestParams", "GrabcutParams", "Homography", "HsvBounds",
    "InvalidTrainingSet", "LabeledTable", "LichenmeterError", "ModelFailure",
    "QuadDetection", "Raster", "SLIC_GRID", "SceneSpec", "SceneStats",
    "SlicParams", "SpecInfeasible", "Stroke", "SuperpixelMap", "SvmParams",
    "SweepConfig", "TargetLayout", "ThallusRecord", "TrainedModel", "WarpSpec",
    "build_table", "classify_image", "cross_validate", "detect_targets",
    "difficulty_spec", "estimate_homography", "extract_features", "filter_small",
    "generate", "init_trimap", "load_image", "load_mask", "load_model",
    "mask_confusion", "mcc", "measure_mask", "precision", "rectify_image",
    "rectify_photo", "refine", "run_sweep", "save_mask", "save_model",
    "save_png", "segment", "select_best", "slic", "train_forest", "train_svm",
    "write_corpus",
]
