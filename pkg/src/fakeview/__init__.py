"""Fake-view detection for video-on-demand view logs."""

from .classifier import LinearModel, LinearSVM, TransductiveSVM, TsvmConfig, train_tsvm
from .detector import DetectionParams, DetectionReport, ModelBundle, run_pipeline, train_models
from .entropy import entropy, entropy_after_new_item, entropy_after_repeat_item, limit_entropy
from .matrix import AccessMatrix, KeyKind
from .online import OnlineConfig, OnlineDetector
from .records import ViewRecord, read_log, read_log_file
from .simulator import AttackConfig, WorkloadConfig, generate_normal_day, inject_attack

__version__ = "0.1.0"

__all__ = [
    "AccessMatrix", "AttackConfig", "DetectionParams", "DetectionReport", "KeyKind", "LinearModel", "LinearSVM",
    "ModelBundle", "OnlineConfig", "OnlineDetector", "TransductiveSVM", "TsvmConfig", "ViewRecord",
    "WorkloadConfig", "entropy", "entropy_after_new_item", "entropy_after_repeat_item", "generate_normal_day",
    "inject_attack", "limit_entropy", "read_log", "read_log_file", "run_pipeline", "train_models", "train_tsvm",
]
