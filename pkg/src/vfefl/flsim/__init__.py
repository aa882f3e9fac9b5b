"""In-process federated-learning simulator."""

from . import attacks
from .attacks import adaptive, gaussian, scaling
from .data import Dataset, FederatedData, flip_labels, load_idx, load_mnist, make_blobs, partition, read_idx, write_idx
from .models import MLP, LogisticRegression, Quadratic, evaluate, local_train
from .simulator import (
    CSV_COLUMNS,
    FULL_CRYPTO,
    PLAINTEXT,
    ExperimentConfig,
    ExperimentResult,
    RoundRecord,
    Simulator,
    run_experiment,
)

__all__ = [
    "CSV_COLUMNS",
    "FULL_CRYPTO",
    "MLP",
    "PLAINTEXT",
    "Dataset",
    "ExperimentConfig",
    "ExperimentResult",
    "FederatedData",
    "LogisticRegression",
    "Quadratic",
    "RoundRecord",
    "Simulator",
    "adaptive",
    "attacks",
    "evaluate",
    "flip_labels",
    "gaussian",
    "load_idx",
    "load_mnist",
    "local_train",
    "make_blobs",
    "partition",
    "read_idx",
    "run_experiment",
    "scaling",
    "write_idx",
]
