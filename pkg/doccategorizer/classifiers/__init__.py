from .base import Checkpoint, Classifier, Trainer, as_indicators, document_text
from .batches import BatchGenerator
from .cnn import CnnClassifier, CnnTrainer, cnn_build
from .registry import CLASSIFIERS, TRAINER_NAMES, TRAINERS, classify, get_trainer, load_classifier, save_classifier
from .settings import MULTI_CLASS, MULTI_LABEL, TrainingSettings
from .statistics import StatisticsLog
from .svm import SvmClassifier, SvmTrainer

__all__ = [
    "Checkpoint",
    "Classifier",
    "Trainer",
    "as_indicators",
    "document_text",
    "BatchGenerator",
    "CnnClassifier",
    "CnnTrainer",
    "cnn_build",
    "CLASSIFIERS",
    "TRAINER_NAMES",
    "TRAINERS",
    "classify",
    "get_trainer",
    "load_classifier",
    "save_classifier",
    "MULTI_CLASS",
    "MULTI_LABEL",
    "TrainingSettings",
    "StatisticsLog",
    "SvmClassifier",
    "SvmTrainer",
]
