"""Infinite-dilution activity coefficients of solutes in ionic liquids from
molecular graphs: SMILES parsing, graph featurization, a dual-channel
GINE+GRU network, a matrix-completion baseline, ensembles and metrics."""

from .dataset import DataRecord, load, split_generalization, split_prediction
from .ensemble import Ensemble, ensemble_predict, train_ensemble
from .evaluate import MetricReport, metrics
from .featurizer import FEATURIZER_VERSION, AttributedGraph, featurize
from .gnn import GnnConfig, GnnModel
from .mcm import McmConfig, McmModel, OutOfMatrixError, build_vocab
from .smiles import SmilesError, read_smiles
from .trainer import TrainConfig, TrainHistory, train

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph",
    "DataRecord",
    "Ensemble",
    "FEATURIZER_VERSION",
    "GnnConfig",
    "GnnModel",
    "McmConfig",
    "McmModel",
    "MetricReport",
    "OutOfMatrixError",
    "SmilesError",
    "TrainConfig",
    "TrainHistory",
    "build_vocab",
    "ensemble_predict",
    "featurize",
    "load",
    "metrics",
    "read_smiles",
    "split_generalization",
    "split_prediction",
    "train",
    "train_ensemble",
]
