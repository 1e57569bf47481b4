"""Prediction-focused supervised topic models (pf-sLDA)."""

__version__ = "0.1.0"

from .corpus import Corpus, Document, Vocabulary, load_corpus, prune_vocabulary, split_corpus
from .estimator import PFSLDA
from .inference import TrainOptions, TrainResult, infer_heldout, predict, train
from .model import ModelConfig, ModelParams, TrainedModel, load_model, sample_corpus, save_model, slda_special_case

__all__ = [
    "PFSLDA",
    "Corpus",
    "Document",
    "ModelConfig",
    "ModelParams",
    "TrainOptions",
    "TrainResult",
    "TrainedModel",
    "Vocabulary",
    "infer_heldout",
    "load_corpus",
    "load_model",
    "predict",
    "prune_vocabulary",
    "sample_corpus",
    "save_model",
    "slda_special_case",
    "split_corpus",
    "train",
]
