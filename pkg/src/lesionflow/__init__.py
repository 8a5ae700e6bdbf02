"""lesionflow: a desk-scale skin lesion classification pipeline.

Deterministic preprocessing with white-patch color constancy, stratified
splitting, class-weighted training of a small from-scratch CNN, full
multiclass metrics, and prediction-averaging ensembles. Everything runs on
one CPU core from plain numpy arrays, and every random choice is derived
from an explicit seed.
"""

from . import data, ensemble, errors, imaging, metrics, nn
from .data import (
    CLASS_NAMES,
    NUM_CLASSES,
    Manifest,
    class_distribution,
    class_weights,
    load_manifest,
    parse_manifest,
    stratified_split,
)
from .imaging import AugmentConfig, augment_eval, augment_train, white_patch_retinex
from .metrics import ClassificationReport, confusion, report
from .ensemble import PredictionSet, average, read_predictions, write_predictions
from .nn import Checkpoint, TrainConfig, evaluate, fit, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "data",
    "ensemble",
    "errors",
    "imaging",
    "metrics",
    "nn",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "Manifest",
    "parse_manifest",
    "load_manifest",
    "class_distribution",
    "class_weights",
    "stratified_split",
    "AugmentConfig",
    "augment_train",
    "augment_eval",
    "white_patch_retinex",
    "ClassificationReport",
    "confusion",
    "report",
    "PredictionSet",
    "average",
    "read_predictions",
    "write_predictions",
    "Checkpoint",
    "TrainConfig",
    "fit",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
    "__version__",
]
