"""Adaptive JPEG quality-factor selection for classification pipelines.

Per image, the selector picks the smallest quality factor from a calibrated
set such that the classifier rank of the ground-truth label is predicted to
stay at least as good as on the original, while the calibrated set itself
guarantees an MS-SSIM floor over the corpus with high probability.
"""

from .dataset import ImageRecord, Manifest, load_image, load_manifest, write_manifest
from .errors import QfSelectError
from .evaluation import (
    RaPoint,
    SweepGrid,
    adaptive_curve,
    baseline_curve,
    compression_ratio,
    emit_report,
    topk_accuracy,
)
from .feasibility import (
    DEFAULT_QF_SET,
    CalibrationReport,
    FeasibilityRecord,
    build_training_set,
    calibrate,
    label_image,
)
from .jpeg import JpegBytes, QualityFactor, QuantTables, decode, encode, quality_to_tables
from .kernels import NUMBA_ENABLED, backend_name
from .metrics import MsSsimParams, ms_ssim, psnr
from .model import (
    BinaryHead,
    FeatureExtractor,
    SelectorModel,
    TrainConfig,
    extract_features,
    load_model,
    predict_feasible,
    save_model,
    train,
)
from .ranks import RankTable, ToyClassifier, build_rank_table, load_rank_table, rank_of, train_toy_classifier
from .selection import SelectionResult, compress_adaptive, compress_manifest, select_qf

__version__ = "0.1.0"

__all__ = [
    "BinaryHead",
    "CalibrationReport",
    "DEFAULT_QF_SET",
    "FeasibilityRecord",
    "FeatureExtractor",
    "ImageRecord",
    "JpegBytes",
    "Manifest",
    "MsSsimParams",
    "NUMBA_ENABLED",
    "QfSelectError",
    "QualityFactor",
    "QuantTables",
    "RaPoint",
    "RankTable",
    "SelectionResult",
    "SelectorModel",
    "SweepGrid",
    "ToyClassifier",
    "TrainConfig",
    "adaptive_curve",
    "backend_name",
    "baseline_curve",
    "build_rank_table",
    "build_training_set",
    "calibrate",
    "compress_adaptive",
    "compress_manifest",
    "compression_ratio",
    "decode",
    "emit_report",
    "encode",
    "extract_features",
    "label_image",
    "load_image",
    "load_manifest",
    "load_model",
    "load_rank_table",
    "ms_ssim",
    "predict_feasible",
    "psnr",
    "quality_to_tables",
    "rank_of",
    "save_model",
    "select_qf",
    "topk_accuracy",
    "train",
    "train_toy_classifier",
    "write_manifest",
]
