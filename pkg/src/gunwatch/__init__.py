"""Motion-gated handgun detection.

A from-scratch CNN engine with gradient-checked training, a
triple-frame-differencing motion gate, transfer learning via head
replacement, synthetic desk-scale datasets, and an evaluation harness.
"""

from .architectures import Prediction, build_mini_backbone, build_paper_cnn, predict
from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import DatasetSpec, gen_motion_sequence, gen_shapes_dataset, load_labeled_dir
from .detection import (
    DetectionEvent,
    FrameRing,
    PipelineConfig,
    classify_rois,
    feed_frame,
    run_stream,
    sliding_window_detect,
)
from .images import BBox, decode_pnm, encode_pnm
from .metrics import ConfusionMatrix, MetricRow, from_pairs, render_table
from .network import Network, grad_check, sgd_step
from .rng import Rng
from .training import TrainConfig, TrainReport, replace_head, set_trainable, train, transfer_experiment

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CnnClassifier",
    "ConfusionMatrix",
    "DatasetSpec",
    "DetectionEvent",
    "FrameRing",
    "MetricRow",
    "Network",
    "PipelineConfig",
    "Prediction",
    "Rng",
    "TrainConfig",
    "TrainReport",
    "build_mini_backbone",
    "build_paper_cnn",
    "classify_rois",
    "decode_pnm",
    "encode_pnm",
    "feed_frame",
    "from_pairs",
    "gen_motion_sequence",
    "gen_shapes_dataset",
    "grad_check",
    "load_checkpoint",
    "load_labeled_dir",
    "predict",
    "render_table",
    "replace_head",
    "run_stream",
    "save_checkpoint",
    "set_trainable",
    "sgd_step",
    "sliding_window_detect",
    "train",
    "transfer_experiment",
]


def __getattr__(name):
    # CnnClassifier pulls in scikit-learn; import it only on demand so
    # the CLI and engine stay fast to import.
    if name == "CnnClassifier":
        from .classifier import CnnClassifier

        return CnnClassifier
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
