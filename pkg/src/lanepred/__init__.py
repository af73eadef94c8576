"""Lateral motion prediction for highway traffic.

Pipeline: highD-convention ingestion -> scene features and maneuver
labels -> a mixture-of-experts predictor (MLP gate over three Gaussian
mixture experts) -> evaluation and context reports. A synthetic corpus
generator provides ground truth for testing without the licensed
dataset.
"""
from .types import (
    CLASS_NAMES,
    DEFAULT_HORIZON,
    NO_EVENT,
    LaneChangeEvent,
    LaneGeometry,
    ManeuverLabel,
    MixturePrediction,
    Recording,
    RecordingMeta,
    SceneContext,
    Track,
)
from .ingest import SensorModel, parse_recording, normalize_direction
from .features import FeatureSchema, Standardizer, detect_lane_changes
from .labeling import SamplingPlan, label_sample, split_folds, undersample
from .mlp import ManeuverClassifier, TrainConfig, train
from .gmm import GaussianMixtureModel, ManeuverExpert, fit_em, fit_expert, select_kernels
from .moe import MoEPredictor, cv_baseline, point_estimate, predict_distribution
from .synth import ScenarioConfig, generate_corpus, sigmoid_lane_change
from .pipeline import PreparedDataset, prepare_corpus

__version__ = "1.0.0"

__all__ = [
    "CLASS_NAMES", "DEFAULT_HORIZON", "NO_EVENT",
    "LaneChangeEvent", "LaneGeometry", "ManeuverLabel", "MixturePrediction",
    "Recording", "RecordingMeta", "SceneContext", "Track",
    "SensorModel", "parse_recording", "normalize_direction",
    "FeatureSchema", "Standardizer", "detect_lane_changes",
    "SamplingPlan", "label_sample", "split_folds", "undersample",
    "ManeuverClassifier", "TrainConfig", "train",
    "GaussianMixtureModel", "ManeuverExpert", "fit_em", "fit_expert",
    "select_kernels",
    "MoEPredictor", "cv_baseline", "point_estimate", "predict_distribution",
    "ScenarioConfig", "generate_corpus", "sigmoid_lane_change",
    "PreparedDataset", "prepare_corpus",
    "__version__",
]
