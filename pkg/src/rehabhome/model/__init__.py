from .network import ModelConfig, ImpairmentNet
from .data import Dataset, build_dataset
from .train import TrainedModel, TrainingDiverged, train
from .evaluate import EvalReport, evaluate, predict, predict_proba
from .gradcheck import gradient_check
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "ModelConfig",
    "ImpairmentNet",
    "Dataset",
    "build_dataset",
    "TrainedModel",
    "TrainingDiverged",
    "train",
    "EvalReport",
    "evaluate",
    "predict",
    "predict_proba",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
]
