"""Training on every labeled sample: validation-free stopping (EB, PE),
good-initialization search and calibration metrics for small classifiers."""

from .data import Dataset, load_csv, synth_gaussian
from .model import ModelSpec, ParameterVector, PredictionSet, init_params
from .numerics import Rng
from .optim import OptimConfig, TrainingTrace, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ModelSpec",
    "OptimConfig",
    "ParameterVector",
    "PredictionSet",
    "Rng",
    "TrainingTrace",
    "init_params",
    "load_csv",
    "synth_gaussian",
    "train",
]
