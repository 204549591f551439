"""Batch-inference workflow engine and timing benchmark harness for
oral-lesion image classification."""

__version__ = "0.1.0"

from .classifier import (
    BackendConfig,
    ModelHandle,
    PredictionResult,
    acquire_model,
    predict_batch,
    predict_one,
    reference_scores,
    reset_registry,
)
from .errors import LesionFlowError
from .taxonomy import ClassTaxonomy, default_taxonomy
from .timing import ExecutionMode, FolderTargets, TimingModel, calibrate_timing_model, timing_preset

__all__ = [
    "BackendConfig",
    "ClassTaxonomy",
    "ExecutionMode",
    "FolderTargets",
    "LesionFlowError",
    "ModelHandle",
    "PredictionResult",
    "TimingModel",
    "acquire_model",
    "calibrate_timing_model",
    "default_taxonomy",
    "predict_batch",
    "predict_one",
    "reference_scores",
    "reset_registry",
    "timing_preset",
]
